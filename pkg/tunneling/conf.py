"""Numerical thresholds shared by the tunneling modules.

Values come from ``settings.TUNNELING`` (populated from the environment in
``config/settings.py``). A run can temporarily replace them with
``override_thresholds``, which is how experiment configs apply their
``tolerances`` block.
"""

import math
from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import asdict, dataclass, fields, replace
from functools import lru_cache
from typing import Any, Iterator, Optional

from django.conf import settings
from django.core.exceptions import ImproperlyConfigured


@dataclass(frozen=True)
class Thresholds:
    # factor used wherever a condition reads "much greater than"
    much_greater: float = 5.0
    # momentum weight below k = 0 that the P1 closed form may ignore
    p1_tail_limit: float = 1e-6
    p2_limit: float = 0.1
    p3_limit: float = 0.1
    monochromatic_limit: float = 0.1
    monochromatic_flag: float = 0.05
    sequential_spread_limit: float = 0.1
    sequential_xi_limit: float = 0.1
    multi_peak_ratio: float = 0.2
    zero_transmission: float = 1e-300
    resonant_denominator: float = 1e-8
    evanescent_cap: float = 700.0
    long_barrier_min: float = 5.0
    step_floor: float = 1e-6
    step_relative: float = 1e-4
    phase_jump: float = math.pi / 2
    k_nodes: int = 256
    k_window: float = 6.0
    nyquist_limit: float = math.pi / 4
    negativity_clamp: float = 1e-12
    normalization_slack: float = 1e-3
    far_detector_factor: float = 10.0
    placement_ratio: float = 0.2
    wronskian_tolerance: float = 1e-10
    degenerate_jacobian: float = 1e-12
    smearing_start: float = 5.0
    phase_error_limit: float = 0.01

    def as_dict(self) -> dict[str, Any]:
        return asdict(self)

    def derivative_step(self, k0: float) -> float:
        return max(self.step_floor, self.step_relative * k0)


FIELD_NAMES = frozenset(field.name for field in fields(Thresholds))

_active: ContextVar[Optional[Thresholds]] = ContextVar(
    "tunneling_thresholds", default=None
)


def _validate_names(values: dict[str, Any]) -> None:
    unknown = set(values) - FIELD_NAMES
    if unknown:
        raise ImproperlyConfigured(
            f"Unknown tunneling thresholds: {', '.join(sorted(unknown))}"
        )


@lru_cache(maxsize=1)
def _configured_thresholds() -> Thresholds:
    values = dict(getattr(settings, "TUNNELING", {}))
    _validate_names(values)
    return Thresholds(**values)


def get_thresholds() -> Thresholds:
    """Return the thresholds in effect for the current context."""
    return _active.get() or _configured_thresholds()


def reset_thresholds_cache() -> None:
    _configured_thresholds.cache_clear()


@contextmanager
def override_thresholds(**values: Any) -> Iterator[Thresholds]:
    _validate_names(values)
    thresholds = replace(get_thresholds(), **values)
    token = _active.set(thresholds)
    try:
        yield thresholds
    finally:
        _active.reset(token)
