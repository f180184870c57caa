import uuid

from django.core.exceptions import ValidationError
from django.db import models
from django.utils import timezone


def new_run_id() -> str:
    return uuid.uuid4().hex[:12]


class ExperimentRun(models.Model):
    """One batch invocation of a pipeline and where its artifacts went."""

    PIPELINE_CHOICES = [
        ("scatter", "Scattering coefficients"),
        ("arrival", "Arrival-time density"),
        ("times", "Delay and tunneling times"),
        ("sequential", "Sequential measurement"),
        ("oracle_compare", "Oracle comparison"),
        ("sweep", "Parameter sweep"),
    ]
    STATE_CHOICES = [
        ("PENDING", "Pending"),
        ("IN_PROGRESS", "In Progress"),
        ("COMPLETED", "Completed"),
        ("FAILED", "Failed"),
    ]

    VALID_STATE_TRANSITIONS = {
        "PENDING": ["IN_PROGRESS", "FAILED"],
        "IN_PROGRESS": ["COMPLETED", "FAILED"],
        "COMPLETED": [],  # Terminal state
        "FAILED": [],  # Terminal state
    }

    run_id = models.CharField(max_length=32, unique=True, default=new_run_id)
    pipeline = models.CharField(max_length=20, choices=PIPELINE_CHOICES)
    config = models.JSONField(default=dict)
    status = models.CharField(max_length=20, choices=STATE_CHOICES, default="PENDING")
    output_dir = models.CharField(max_length=500, blank=True)
    manifest = models.JSONField(default=dict, blank=True)
    exit_code = models.IntegerField(null=True, blank=True)
    error_message = models.TextField(blank=True)
    started_at = models.DateTimeField(null=True, blank=True)
    completed_at = models.DateTimeField(null=True, blank=True)
    duration = models.FloatField(
        null=True, blank=True, help_text="Wall-clock seconds spent in the pipeline."
    )
    created_at = models.DateTimeField(auto_now_add=True)
    updated_at = models.DateTimeField(auto_now=True)

    class Meta:
        ordering = ["-created_at", "-id"]
        indexes = [
            models.Index(
                fields=["pipeline", "status"], name="experiments_pipelin_3c1f0a_idx"
            ),
            models.Index(fields=["created_at"], name="experiments_created_9d2b41_idx"),
        ]

    def __str__(self) -> str:
        return f"{self.pipeline} run {self.run_id}"

    def _validate_state_transition(self, new_state: str) -> None:
        """Validate if the state transition is allowed."""
        if new_state not in self.VALID_STATE_TRANSITIONS.get(self.status, []):
            raise ValidationError(
                f"Invalid state transition from {self.status} to {new_state}"
            )

    def start(self) -> None:
        self._validate_state_transition("IN_PROGRESS")
        self.started_at = timezone.now()
        self.status = "IN_PROGRESS"
        self.save()

    def complete(self, manifest: dict) -> None:
        self._validate_state_transition("COMPLETED")
        self.completed_at = timezone.now()
        self.status = "COMPLETED"
        self.manifest = manifest
        self.exit_code = 0
        self.calculate_duration()
        self.save()

    def fail(self, error_message: str, exit_code: int = 1) -> None:
        """Mark the run as failed with an error message."""
        self._validate_state_transition("FAILED")
        self.completed_at = timezone.now()
        self.status = "FAILED"
        self.error_message = error_message
        self.exit_code = exit_code
        self.calculate_duration()
        self.save()

    def calculate_duration(self) -> None:
        if self.started_at and self.completed_at:
            self.duration = (self.completed_at - self.started_at).total_seconds()
