from ._base import ExperimentCommand, parse_floats


class Command(ExperimentCommand):
    help = "Delay and tunneling-time marginals of the sequential measurement"
    pipeline = "sequential"
    uses = ("potential", "physics", "state", "t")

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("--t-d", help="Delay grid start:stop:num")
        parser.add_argument(
            "--resolution",
            help="Coherent-state widths, comma separated (one marginal pair each)",
        )
        parser.add_argument(
            "--samples", type=int, help="Pushforward sample count (0 skips the check)"
        )
        parser.add_argument("--rough", action="store_true")

    def configure(self, config, options):
        method = config.setdefault("method", {})
        if options.get("t_d") is not None:
            config.setdefault("grids", {})["t_d"] = options["t_d"]
        if options.get("resolution") is not None:
            method["sigma"] = parse_floats(options["resolution"])
        if options.get("samples") is not None:
            method["pushforward_samples"] = options["samples"]
        if options.get("rough"):
            method["rough"] = True
