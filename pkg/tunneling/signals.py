from django.core.signals import setting_changed
from django.dispatch import receiver

from .conf import reset_thresholds_cache
from .scattering import clear_solution_cache


@receiver(setting_changed)
def reload_thresholds(sender, setting, **kwargs):
    """Drop cached thresholds and solutions when TUNNELING is overridden."""
    if setting == "TUNNELING":
        reset_thresholds_cache()
        clear_solution_cache()
