from tunneling.validation import CASES

from ._base import ExperimentCommand


class Command(ExperimentCommand):
    help = "Cross-check the arrival density against a grid propagation"
    pipeline = "oracle_compare"
    uses = ()

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("--case", choices=sorted(CASES))
        parser.add_argument(
            "--no-grid-check",
            action="store_true",
            help="Skip the halved-grid convergence gate",
        )

    def configure(self, config, options):
        method = config.setdefault("method", {})
        if options.get("case") is not None:
            method["case"] = options["case"]
        if options.get("no_grid_check"):
            method["grid_check"] = False
