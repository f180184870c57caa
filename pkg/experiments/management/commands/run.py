from django.core.management.base import CommandError

from experiments.services import run_experiment, run_sweep

from ._base import ExperimentCommand


class Command(ExperimentCommand):
    help = "Run the pipeline (or sweep) described by a config document"
    uses = ("potential", "physics", "state", "k", "t")

    def build_config(self, options):
        if not options.get("config"):
            raise CommandError("--config is required", returncode=2)
        return super().build_config(options)

    def execute_config(self, config):
        if "sweep" in config:
            return run_sweep(config)
        return run_experiment(config)
