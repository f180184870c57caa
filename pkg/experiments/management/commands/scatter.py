from ._base import ExperimentCommand


class Command(ExperimentCommand):
    help = "Transmission and reflection coefficients on a wave-number grid"
    pipeline = "scatter"
    uses = ("potential", "physics", "k")
