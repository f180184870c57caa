from django.apps import AppConfig


class TunnelingConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "tunneling"

    def ready(self):
        """Import signals when the app is ready."""
        import tunneling.signals  # noqa: F401
