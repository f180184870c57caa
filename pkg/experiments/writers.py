"""Artifact serialization for experiment runs.

Numbers are computed in natural units (hbar = 1). The ``units`` block of a
config rescales values only here, when they are written. No timestamps or
run identifiers go into artifacts, so identical configs give identical
bytes.
"""

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np
import pandas as pd
from rest_framework.utils.encoders import JSONEncoder

logger = logging.getLogger(__name__)

CSV_FLOAT_FORMAT = "%.17g"


@dataclass(frozen=True)
class Units:
    """Display scales for length and mass; time follows as mass * length**2."""

    length: float = 1.0
    mass: float = 1.0

    def factor(self, dimension: Optional[str]) -> float:
        time = self.mass * self.length**2
        return {
            None: 1.0,
            "length": self.length,
            "mass": self.mass,
            "time": time,
            "wavenumber": 1.0 / self.length,
            "rate": 1.0 / time,
            "area": self.length**2,
        }[dimension]

    def as_dict(self) -> dict[str, float]:
        return {"length": self.length, "mass": self.mass}


def _finite(value: Any) -> Any:
    """Replace non-finite floats by None so the JSON stays standard."""
    if isinstance(value, dict):
        return {str(key): _finite(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_finite(item) for item in value]
    if isinstance(value, np.ndarray):
        return _finite(value.tolist())
    if isinstance(value, (float, np.floating)) and not np.isfinite(value):
        return None
    return value


def dumps(data: Any) -> str:
    return (
        json.dumps(
            _finite(data),
            cls=JSONEncoder,
            sort_keys=True,
            indent=2,
            ensure_ascii=False,
            allow_nan=False,
        )
        + "\n"
    )


@dataclass
class RunWriter:
    directory: Path
    units: Units = field(default_factory=Units)
    artifacts: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.directory = Path(self.directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def _record(self, name: str, payload: bytes) -> Path:
        path = self.directory / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(payload)
        self.artifacts[name] = hashlib.sha256(payload).hexdigest()
        logger.info("Wrote artifact %s (%d bytes)", path, len(payload))
        return path

    def write_csv(
        self,
        name: str,
        frame: pd.DataFrame,
        dimensions: Optional[dict[str, str]] = None,
    ) -> Path:
        """Write ``frame`` with columns rescaled by their physical dimension."""
        scaled = frame.copy()
        for column, dimension in (dimensions or {}).items():
            if column in scaled:
                scaled[column] = scaled[column] * self.units.factor(dimension)
        text = scaled.to_csv(
            index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n"
        )
        return self._record(name, text.encode("utf-8"))

    def write_json(
        self,
        name: str,
        data: dict[str, Any],
        dimensions: Optional[dict[str, str]] = None,
    ) -> Path:
        scaled = dict(data)
        for key, dimension in (dimensions or {}).items():
            if scaled.get(key) is not None:
                scaled[key] = scaled[key] * self.units.factor(dimension)
        return self._record(name, dumps(scaled).encode("utf-8"))

    def write_manifest(self, manifest: dict[str, Any]) -> Path:
        """manifest.json with the checksum of every artifact written before it."""
        body = {
            **manifest,
            "units": self.units.as_dict(),
            "artifacts": dict(sorted(self.artifacts.items())),
        }
        path = self.directory / "manifest.json"
        path.write_text(dumps(body), encoding="utf-8")
        return path


def read_json(path: Path) -> dict[str, Any]:
    return json.loads(Path(path).read_text(encoding="utf-8"))
