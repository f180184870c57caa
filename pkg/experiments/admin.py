from django.contrib import admin
from django.utils.html import format_html

from .models import ExperimentRun


@admin.register(ExperimentRun)
class ExperimentRunAdmin(admin.ModelAdmin):
    list_display = (
        "run_id",
        "pipeline",
        "status",
        "exit_code",
        "get_duration",
        "created_at",
    )
    search_fields = ("run_id", "output_dir")
    list_filter = ("pipeline", "status", "created_at")
    readonly_fields = ("run_id", "config", "manifest", "started_at", "completed_at")

    def get_duration(self, obj):
        if obj.status == "COMPLETED" and obj.duration is not None:
            return format_html('<span style="color: green;">{}s</span>', obj.duration)
        return "-"

    get_duration.short_description = "Duration"
