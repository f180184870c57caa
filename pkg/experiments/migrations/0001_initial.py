import experiments.models
from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name="ExperimentRun",
            fields=[
                (
                    "id",
                    models.BigAutoField(
                        auto_created=True,
                        primary_key=True,
                        serialize=False,
                        verbose_name="ID",
                    ),
                ),
                (
                    "run_id",
                    models.CharField(
                        default=experiments.models.new_run_id,
                        max_length=32,
                        unique=True,
                    ),
                ),
                (
                    "pipeline",
                    models.CharField(
                        choices=[
                            ("scatter", "Scattering coefficients"),
                            ("arrival", "Arrival-time density"),
                            ("times", "Delay and tunneling times"),
                            ("sequential", "Sequential measurement"),
                            ("oracle_compare", "Oracle comparison"),
                            ("sweep", "Parameter sweep"),
                        ],
                        max_length=20,
                    ),
                ),
                ("config", models.JSONField(default=dict)),
                (
                    "status",
                    models.CharField(
                        choices=[
                            ("PENDING", "Pending"),
                            ("IN_PROGRESS", "In Progress"),
                            ("COMPLETED", "Completed"),
                            ("FAILED", "Failed"),
                        ],
                        default="PENDING",
                        max_length=20,
                    ),
                ),
                ("output_dir", models.CharField(blank=True, max_length=500)),
                ("manifest", models.JSONField(blank=True, default=dict)),
                ("exit_code", models.IntegerField(blank=True, null=True)),
                ("error_message", models.TextField(blank=True)),
                ("started_at", models.DateTimeField(blank=True, null=True)),
                ("completed_at", models.DateTimeField(blank=True, null=True)),
                (
                    "duration",
                    models.FloatField(
                        blank=True,
                        help_text="Wall-clock seconds spent in the pipeline.",
                        null=True,
                    ),
                ),
                ("created_at", models.DateTimeField(auto_now_add=True)),
                ("updated_at", models.DateTimeField(auto_now=True)),
            ],
            options={
                "ordering": ["-created_at", "-id"],
                "indexes": [
                    models.Index(
                        fields=["pipeline", "status"],
                        name="experiments_pipelin_3c1f0a_idx",
                    ),
                    models.Index(
                        fields=["created_at"], name="experiments_created_9d2b41_idx"
                    ),
                ],
            },
        ),
    ]
