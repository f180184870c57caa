from pathlib import Path
from typing import Any

from celery import shared_task

from .services import execute_pipeline, summary_record


@shared_task
def run_sweep_point(config: dict[str, Any], directory: str, label: str) -> dict:
    """Run one validated sweep point; returns its scalar summary."""
    result = execute_pipeline(config, Path(directory), run_id=label)
    return summary_record(result.summary)
