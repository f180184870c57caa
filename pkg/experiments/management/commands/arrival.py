from experiments.serializers import ARRIVAL_METHODS

from ._base import ExperimentCommand


class Command(ExperimentCommand):
    help = "Arrival-time density at the detector and the times read off its peak"
    pipeline = "arrival"
    uses = ("potential", "physics", "state", "t")

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("--method", choices=ARRIVAL_METHODS)
        parser.add_argument("--tau", type=float, help="Smearing time (smeared)")
        parser.add_argument("--nodes", type=int, help="Quadrature nodes in k")

    def configure(self, config, options):
        method = config.setdefault("method", {})
        for name in ("method", "tau", "nodes"):
            if options.get(name) is not None:
                method["arrival" if name == "method" else name] = options[name]
