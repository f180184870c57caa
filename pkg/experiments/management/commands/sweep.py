from django.core.management.base import CommandError

from ._base import (
    ExperimentCommand,
    SweepCommandMixin,
    parse_assignment,
    parse_floats,
)


class Command(SweepCommandMixin, ExperimentCommand):
    help = "Run a pipeline over a grid of up to three swept parameters"
    uses = ()

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument(
            "--axis",
            action="append",
            default=[],
            metavar="PATH=SPEC",
            help="e.g. potential.d=1:4:7 or method.sigma=1,2,4; repeatable",
        )

    def build_config(self, options):
        if not options.get("config"):
            raise CommandError("--config is required", returncode=2)
        return super().build_config(options)

    def configure(self, config, options):
        if not options["axis"]:
            return
        axes = []
        for text in options["axis"]:
            path, spec = parse_assignment(text)
            if spec.count(":") == 2:
                axes.append({"path": path, "range": spec})
            else:
                axes.append({"path": path, "values": parse_floats(spec)})
        config["sweep"] = {"axes": axes}
