"""Shared plumbing of the pipeline management commands.

Every command builds one config document from an optional YAML file and
its flags, validates it with ``ExperimentConfigSerializer`` and runs it.
Exit status: 0 on success, 1 on a regime violation or other numerical
failure (unless ``--force``) and on a failed oracle comparison, 2 on a
config error.
"""

import json
from pathlib import Path
from typing import Any, Optional

import yaml
from django.core.exceptions import ValidationError as DjangoValidationError
from django.core.management.base import BaseCommand, CommandError
from rest_framework import serializers

from experiments.services import run_experiment, run_sweep, validate_config
from tunneling.exceptions import TunnelingError


def parse_assignment(text: str) -> tuple[str, str]:
    name, sep, value = text.partition("=")
    if not sep or not name:
        raise serializers.ValidationError(f"Expected NAME=VALUE, got '{text}'.")
    return name.strip(), value.strip()


def parse_floats(text: str) -> list[float]:
    try:
        return [float(item) for item in text.split(",") if item.strip()]
    except ValueError:
        raise serializers.ValidationError(f"Expected comma-separated numbers: {text}")


def load_config_file(path: str) -> dict[str, Any]:
    """Read a YAML (or JSON) config document."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise CommandError(f"Cannot read config {path}: {e}", returncode=2)
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise CommandError(f"Invalid YAML in {path}: {e}", returncode=2)
    if not isinstance(data, dict):
        raise CommandError(f"Config {path} must be a mapping", returncode=2)
    return data


def _set(config: dict[str, Any], path: str, value: Any) -> None:
    node = config
    *parents, key = path.split(".")
    for name in parents:
        node = node.setdefault(name, {})
    node[key] = value


class ExperimentCommand(BaseCommand):
    """Base for commands that run one pipeline."""

    pipeline: Optional[str] = None
    # flag groups a command exposes on top of the shared ones
    uses = ("potential", "physics")

    def add_arguments(self, parser):
        parser.add_argument("--config", help="YAML config document; flags override it")
        if "potential" in self.uses:
            parser.add_argument(
                "--potential", help="e.g. square:V0=2,d=1 or delta:kappa=1"
            )
        if "physics" in self.uses:
            parser.add_argument("--M", type=float, help="Particle mass")
            parser.add_argument("--L", type=float, help="Detector position")
        if "state" in self.uses:
            parser.add_argument("--x0", type=float, help="Packet centre")
            parser.add_argument("--k0", type=float, help="Mean wave number")
            parser.add_argument("--delta", type=float, help="Packet width in x")
            parser.add_argument("--sigma", type=float, help="Momentum spread")
        if "k" in self.uses:
            parser.add_argument("--k", help="Wave-number grid start:stop:num")
        if "t" in self.uses:
            parser.add_argument("--t", help="Time grid start:stop:num")
        parser.add_argument(
            "--tolerance",
            action="append",
            default=[],
            metavar="NAME=VALUE",
            help="Override a regime threshold; repeatable",
        )
        parser.add_argument("--output", help="Run directory")
        parser.add_argument(
            "--force",
            action="store_true",
            help="Record regime violations in the manifest and continue",
        )
        parser.add_argument("--units-length", type=float, help="Display length scale")
        parser.add_argument("--units-mass", type=float, help="Display mass scale")

    def configure(self, config: dict[str, Any], options: dict[str, Any]) -> None:
        """Copy pipeline-specific flags into ``config``."""

    def build_config(self, options: dict[str, Any]) -> dict[str, Any]:
        config = load_config_file(options["config"]) if options.get("config") else {}
        if self.pipeline:
            config["pipeline"] = self.pipeline
        flags = {
            "potential": "potential",
            "M": "physics.M",
            "L": "physics.L",
            "x0": "state.x0",
            "k0": "state.k0",
            "delta": "state.delta",
            "sigma": "state.sigma",
            "k": "grids.k",
            "t": "grids.t",
            "output": "output.directory",
            "units_length": "units.length",
            "units_mass": "units.mass",
        }
        for option, path in flags.items():
            if options.get(option) is not None:
                _set(config, path, options[option])
        for text in options.get("tolerance", []):
            name, value = parse_assignment(text)
            _set(config, f"tolerances.{name}", value)
        if options.get("force"):
            config["force"] = True
        self.configure(config, options)
        return config

    def execute_config(self, config: dict[str, Any]):
        return run_experiment(config)

    def handle(self, *args, **options):
        try:
            config = validate_config(self.build_config(options))
            run, result = self.execute_config(config)
        except (serializers.ValidationError, yaml.YAMLError) as e:
            raise CommandError(f"Invalid config: {_detail(e)}", returncode=2)
        except TunnelingError as e:
            raise CommandError(f"{type(e).__name__}: {e.messages[0]}", returncode=1)
        except DjangoValidationError as e:
            raise CommandError(f"Invalid config: {'; '.join(e.messages)}", returncode=2)
        self.stdout.write(json.dumps(result.summary, sort_keys=True, default=str))
        self.stdout.write(
            self.style.SUCCESS(f"Run {run.run_id}: artifacts in {result.directory}")
        )
        if not result.passed:
            raise CommandError("Comparison checks failed", returncode=1)


class SweepCommandMixin:
    def execute_config(self, config: dict[str, Any]):
        return run_sweep(config)


def _detail(error: Exception) -> str:
    detail = getattr(error, "detail", None)
    return json.dumps(detail, default=str) if detail is not None else str(error)
