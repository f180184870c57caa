from ._base import ExperimentCommand


class Command(ExperimentCommand):
    help = "Delay, tunneling time and uncertainty bound at the mean wave number"
    pipeline = "times"
    uses = ("potential", "physics", "state")
