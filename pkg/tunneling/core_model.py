"""Physical parameters, barrier models and initial states.

Natural units with hbar = 1 are used throughout: momenta are wave numbers,
energies are k**2 / 2M and times carry units of mass * length**2.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Iterable, Optional, Sequence, Union

import numpy as np
from django.core.exceptions import ValidationError
from scipy.interpolate import CubicSpline
from scipy.optimize import bisect

from .conf import get_thresholds
from .exceptions import NonDifferentiablePotential

logger = logging.getLogger(__name__)

# Slab used by the transfer-matrix solver: (x_left, x_right, V).
Slab = tuple[float, float, float]
# Point interaction used by the transfer-matrix solver: (x, kappa).
PointInteraction = tuple[float, float]

SAMPLED_SLABS = 2000


class BasePotential:
    """Common behaviour of the compact-support barrier models."""

    kind: str = ""

    @property
    def half_width(self) -> float:
        return 0.0

    @property
    def width(self) -> float:
        return 2.0 * self.half_width

    @property
    def is_distributional(self) -> bool:
        return False

    @property
    def max_value(self) -> float:
        return 0.0

    @property
    def is_parity_symmetric(self) -> bool:
        return True

    @property
    def is_differentiable(self) -> bool:
        return False

    def value(self, x: Any) -> Any:
        return np.zeros_like(np.asarray(x, dtype=float))

    def derivative(self, x: float) -> float:
        raise NonDifferentiablePotential(
            f"{type(self).__name__} has no pointwise derivative",
            potential=self.kind,
        )

    def slabs(self) -> tuple[Slab, ...]:
        return ()

    def point_interactions(self) -> tuple[PointInteraction, ...]:
        return ()

    def mirrored(self) -> "BasePotential":
        return self

    def describe(self) -> dict[str, Any]:
        return {"kind": self.kind}


@dataclass(frozen=True)
class Free(BasePotential):
    kind = "free"


@dataclass(frozen=True)
class SquareBarrier(BasePotential):
    V0: float
    d: float
    kind = "square"

    def __post_init__(self) -> None:
        if self.V0 <= 0:
            raise ValidationError("Barrier height V0 must be positive")
        if self.d <= 0:
            raise ValidationError("Barrier width d must be positive")

    @property
    def half_width(self) -> float:
        return self.d / 2.0

    @property
    def max_value(self) -> float:
        return self.V0

    def value(self, x: Any) -> Any:
        x = np.asarray(x, dtype=float)
        return np.where(np.abs(x) <= self.half_width, self.V0, 0.0)

    def slabs(self) -> tuple[Slab, ...]:
        return ((-self.half_width, self.half_width, self.V0),)

    def describe(self) -> dict[str, Any]:
        return {"kind": self.kind, "V0": self.V0, "d": self.d}


@dataclass(frozen=True)
class DeltaBarrier(BasePotential):
    """Point barrier V(x) = (kappa / M) delta(x); kept symbolic."""

    kappa: float
    kind = "delta"

    def __post_init__(self) -> None:
        if self.kappa <= 0:
            raise ValidationError("Delta strength kappa must be positive")

    @property
    def is_distributional(self) -> bool:
        return True

    @property
    def max_value(self) -> float:
        return math.inf

    def point_interactions(self) -> tuple[PointInteraction, ...]:
        return ((0.0, self.kappa),)

    def describe(self) -> dict[str, Any]:
        return {"kind": self.kind, "kappa": self.kappa}


@dataclass(frozen=True)
class PiecewiseConstant(BasePotential):
    segments: tuple[Slab, ...]
    kind = "piecewise"

    def __post_init__(self) -> None:
        segments = tuple(
            (float(left), float(right), float(height))
            for left, right, height in self.segments
        )
        if not segments:
            raise ValidationError("A piecewise potential needs at least one segment")
        previous_right = -math.inf
        for left, right, height in sorted(segments):
            if right <= left:
                raise ValidationError(
                    f"Segment [{left}, {right}] must have positive width"
                )
            if height < 0:
                raise ValidationError("Potential values must be non-negative")
            if left < previous_right:
                raise ValidationError("Segments must not overlap")
            previous_right = right
        object.__setattr__(self, "segments", tuple(sorted(segments)))

    @property
    def half_width(self) -> float:
        return max(max(abs(left), abs(right)) for left, right, _ in self.segments)

    @property
    def max_value(self) -> float:
        return max(height for _, _, height in self.segments)

    @property
    def is_parity_symmetric(self) -> bool:
        mirrored = self.mirrored().segments
        return all(
            np.allclose(a, b, rtol=0.0, atol=1e-12)
            for a, b in zip(self.segments, mirrored)
        )

    def value(self, x: Any) -> Any:
        x = np.asarray(x, dtype=float)
        result = np.zeros_like(x)
        for left, right, height in self.segments:
            result = np.where((x >= left) & (x <= right), height, result)
        return result

    def slabs(self) -> tuple[Slab, ...]:
        return self.segments

    def mirrored(self) -> "PiecewiseConstant":
        return PiecewiseConstant(
            tuple((-right, -left, height) for left, right, height in self.segments)
        )

    def describe(self) -> dict[str, Any]:
        return {"kind": self.kind, "segments": [list(s) for s in self.segments]}


@dataclass(frozen=True)
class Sampled(BasePotential):
    """Tabulated potential, cubic interpolation between the samples."""

    x: tuple[float, ...]
    V: tuple[float, ...]
    kind = "sampled"

    def __post_init__(self) -> None:
        x = tuple(float(v) for v in self.x)
        V = tuple(float(v) for v in self.V)
        if len(x) != len(V) or len(x) < 4:
            raise ValidationError(
                "Sampled potentials need matching x and V arrays of length >= 4"
            )
        if np.any(np.diff(x) <= 0):
            raise ValidationError("Sample positions must be strictly increasing")
        if min(V) < 0:
            raise ValidationError("Potential values must be non-negative")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "V", V)

    @classmethod
    def from_function(
        cls, func: Any, half_width: float, points: int = 401
    ) -> "Sampled":
        grid = np.linspace(-half_width, half_width, points)
        values = np.clip(func(grid), 0.0, None)
        values[0] = values[-1] = 0.0
        return cls(tuple(grid), tuple(values))

    @classmethod
    def gaussian_bump(
        cls, V0: float, width: float, half_width: float, points: int = 401
    ) -> "Sampled":
        return cls.from_function(
            lambda x: V0 * np.exp(-(x**2) / (2.0 * width**2)), half_width, points
        )

    @cached_property
    def _spline(self) -> CubicSpline:
        return CubicSpline(self.x, self.V)

    @property
    def half_width(self) -> float:
        return max(abs(self.x[0]), abs(self.x[-1]))

    @property
    def max_value(self) -> float:
        return max(self.V)

    @property
    def is_differentiable(self) -> bool:
        return True

    @property
    def is_parity_symmetric(self) -> bool:
        grid = np.asarray(self.x)
        return bool(
            np.allclose(self.value(grid), self.value(-grid), rtol=0.0, atol=1e-12)
        )

    def value(self, x: Any) -> Any:
        x = np.asarray(x, dtype=float)
        inside = (x >= self.x[0]) & (x <= self.x[-1])
        values = np.clip(self._spline(np.clip(x, self.x[0], self.x[-1])), 0.0, None)
        return np.where(inside, values, 0.0)

    def derivative(self, x: float) -> float:
        return float(self._spline(x, 1))

    def slabs(self) -> tuple[Slab, ...]:
        edges = np.linspace(self.x[0], self.x[-1], SAMPLED_SLABS + 1)
        midpoints = 0.5 * (edges[:-1] + edges[1:])
        heights = self.value(midpoints)
        return tuple(
            (float(left), float(right), float(height))
            for left, right, height in zip(edges[:-1], edges[1:], heights)
        )

    def mirrored(self) -> "Sampled":
        return Sampled(tuple(-v for v in reversed(self.x)), tuple(reversed(self.V)))

    def describe(self) -> dict[str, Any]:
        return {"kind": self.kind, "x": list(self.x), "V": list(self.V)}


Potential = Union[Free, SquareBarrier, DeltaBarrier, PiecewiseConstant, Sampled]


def potential_from_dict(data: dict[str, Any]) -> Potential:
    """Build a potential from its config mapping (see ``describe``)."""
    kind = data.get("kind")
    if kind == "free":
        return Free()
    if kind == "square":
        return SquareBarrier(V0=float(data["V0"]), d=float(data["d"]))
    if kind == "delta":
        return DeltaBarrier(kappa=float(data["kappa"]))
    if kind == "piecewise":
        return PiecewiseConstant(tuple(tuple(s) for s in data["segments"]))
    if kind == "sampled":
        return Sampled(tuple(data["x"]), tuple(data["V"]))
    raise ValidationError(f"Unknown potential kind: {kind}")


def parse_potential(text: str) -> Potential:
    """Parse the short form used on the command line, e.g. ``square:V0=2,d=1``."""
    kind, _, arguments = text.partition(":")
    data: dict[str, Any] = {"kind": kind.strip()}
    for item in filter(None, arguments.split(",")):
        key, sep, raw = item.partition("=")
        if not sep:
            raise ValidationError(f"Malformed potential argument: {item!r}")
        data[key.strip()] = float(raw)
    try:
        return potential_from_dict(data)
    except KeyError as e:
        raise ValidationError(f"Missing potential parameter {e.args[0]} for {kind}")


def evaluate_potential(p: Potential, x: Any) -> Any:
    """V(x), exactly zero outside the support; point barriers evaluate to 0."""
    values = p.value(x)
    return float(values) if np.ndim(values) == 0 else values


def _crossings(p: Potential, energy: float) -> list[float]:
    grid = np.linspace(p.x[0], p.x[-1], 4 * len(p.x))  # type: ignore[union-attr]
    excess = p.value(grid) - energy
    roots = []
    for i in np.flatnonzero(np.sign(excess[:-1]) != np.sign(excess[1:])):
        roots.append(
            bisect(
                lambda y: float(p.value(y)) - energy, grid[i], grid[i + 1], xtol=1e-13
            )
        )
    return roots


def forbidden_region(p: Potential, k: float, M: float) -> tuple[float, float, float]:
    """Outermost classical turning points (x1, x2) and d_k = x2 - x1."""
    energy = k**2 / (2.0 * M)
    if isinstance(p, (Free, DeltaBarrier)):
        return 0.0, 0.0, 0.0
    if isinstance(p, Sampled):
        roots = _crossings(p, energy)
        if len(roots) < 2:
            return 0.0, 0.0, 0.0
        if len(roots) > 2:
            logger.info(
                "Sampled potential has %d turning points at E=%.6g; using outermost",
                len(roots),
                energy,
            )
        return roots[0], roots[-1], roots[-1] - roots[0]
    blocked = [(left, right) for left, right, V in p.slabs() if V > energy]
    if not blocked:
        return 0.0, 0.0, 0.0
    x1 = min(left for left, _ in blocked)
    x2 = max(right for _, right in blocked)
    return x1, x2, x2 - x1


def a_coefficient(
    p: Potential, k: float, M: float, use_parity_shortcut: bool = True
) -> float:
    """Coefficient of the leading sigma-dependence of the forbidden-region time.

    Args:
        p: barrier model
        k: mean wave number
        M: mass
        use_parity_shortcut: apply -M d_k / k**2 for parity-symmetric barriers

    Raises:
        NonDifferentiablePotential: V' is needed at a turning point but the
            model has no pointwise derivative there (or it vanishes).
    """
    x1, x2, d_k = forbidden_region(p, k, M)
    if d_k == 0.0:
        return 0.0
    if use_parity_shortcut and p.is_parity_symmetric:
        return -M * d_k / k**2
    if not p.is_differentiable:
        raise NonDifferentiablePotential(
            "Turning-point derivative unavailable and no parity shortcut applies",
            potential=p.kind,
        )
    slope_1, slope_2 = p.derivative(x1), p.derivative(x2)
    if slope_1 == 0.0 or slope_2 == 0.0:
        raise NonDifferentiablePotential(
            "Potential is flat at a turning point", x1=x1, x2=x2
        )
    return k / M * (1.0 / slope_2 - 1.0 / slope_1) - M * d_k / k**2


@dataclass(frozen=True)
class PhysParams:
    M: float
    L: float

    def __post_init__(self) -> None:
        if self.M <= 0:
            raise ValidationError("Mass M must be positive")

    def validate_against(self, p: Potential) -> bool:
        """Check the detector lies right of the support; returns the far flag."""
        if self.L <= p.half_width:
            raise ValidationError(
                f"Detector position L={self.L} must exceed the support "
                f"half-width {p.half_width}"
            )
        far = self.L >= get_thresholds().far_detector_factor * p.width
        if not far:
            logger.warning(
                "Detector at L=%.6g is within %g barrier widths (d=%.6g)",
                self.L,
                get_thresholds().far_detector_factor,
                p.width,
            )
        return far


@dataclass(frozen=True)
class GaussianState:
    x0: float
    k0: float
    delta: float
    sigma: float

    def __post_init__(self) -> None:
        if self.k0 <= 0:
            raise ValidationError("Mean momentum k0 must be positive")
        if self.delta <= 0 or self.sigma <= 0:
            raise ValidationError("Position and momentum spreads must be positive")
        if abs(self.sigma * self.delta - 0.5) > 1e-12:
            raise ValidationError(
                f"Minimum-uncertainty state requires sigma*delta = 1/2, "
                f"got {self.sigma * self.delta!r}"
            )
        if self.sigma / self.k0 >= 1:
            raise ValidationError("Momentum spread must satisfy sigma/k0 < 1")

    @classmethod
    def from_delta(cls, x0: float, k0: float, delta: float) -> "GaussianState":
        return cls(x0=x0, k0=k0, delta=delta, sigma=1.0 / (2.0 * delta))

    @classmethod
    def from_sigma(cls, x0: float, k0: float, sigma: float) -> "GaussianState":
        return cls(x0=x0, k0=k0, delta=1.0 / (2.0 * sigma), sigma=sigma)

    @property
    def is_monochromatic(self) -> bool:
        return self.sigma / self.k0 <= get_thresholds().monochromatic_flag

    @property
    def components(self) -> tuple["GaussianState", ...]:
        return (self,)

    @property
    def momentum_window(self) -> tuple[float, float]:
        width = get_thresholds().k_window * self.sigma
        return self.k0 - width, self.k0 + width

    def momentum_amplitude(self, k: Any) -> Any:
        k = np.asarray(k, dtype=float)
        return (2.0 * np.pi * self.sigma**2) ** -0.25 * np.exp(
            -((k - self.k0) ** 2) / (4.0 * self.sigma**2) - 1j * (k - self.k0) * self.x0
        )

    def momentum_density(self, k: Any) -> Any:
        return np.abs(self.momentum_amplitude(k)) ** 2

    def position_amplitude(self, x: Any) -> Any:
        x = np.asarray(x, dtype=float)
        return (2.0 * np.pi * self.delta**2) ** -0.25 * np.exp(
            -((x - self.x0) ** 2) / (4.0 * self.delta**2) + 1j * self.k0 * x
        )

    def check_placement(self, p: Potential) -> float:
        """Validate the packet starts left of the barrier; returns delta/gap."""
        gap = abs(self.x0 + p.half_width)
        if self.x0 >= -p.half_width or self.delta >= gap:
            raise ValidationError(
                f"Initial state at x0={self.x0} with delta={self.delta} overlaps "
                f"the barrier support"
            )
        ratio = self.delta / gap
        if ratio > get_thresholds().placement_ratio:
            logger.warning(
                "Initial packet is close to the barrier: delta/|x0+d/2| = %.3g",
                ratio,
            )
        return ratio

    def describe(self) -> dict[str, float]:
        return {"x0": self.x0, "k0": self.k0, "delta": self.delta, "sigma": self.sigma}


@dataclass(frozen=True)
class GaussianSuperposition:
    """Normalized coherent sum of Gaussian packets."""

    terms: tuple[tuple[complex, GaussianState], ...]
    norm: float = field(init=False, default=1.0)

    def __post_init__(self) -> None:
        if not self.terms:
            raise ValidationError("A superposition needs at least one component")
        grid = np.linspace(*self._raw_window(), 4001)
        raw = np.abs(self._raw_amplitude(grid)) ** 2
        object.__setattr__(self, "norm", float(np.sqrt(np.trapezoid(raw, grid))))

    @classmethod
    def of(
        cls,
        states: Iterable[GaussianState],
        weights: Optional[Sequence[complex]] = None,
    ) -> "GaussianSuperposition":
        members = tuple(states)
        coefficients = (
            tuple(weights) if weights is not None else (1.0 + 0j,) * len(members)
        )
        return cls(tuple(zip(coefficients, members)))

    def _raw_window(self) -> tuple[float, float]:
        windows = [state.momentum_window for _, state in self.terms]
        return min(w[0] for w in windows), max(w[1] for w in windows)

    def _raw_amplitude(self, k: Any) -> Any:
        return sum(weight * state.momentum_amplitude(k) for weight, state in self.terms)

    @property
    def components(self) -> tuple[GaussianState, ...]:
        return tuple(state for _, state in self.terms)

    @property
    def k0(self) -> float:
        return float(np.mean([state.k0 for state in self.components]))

    @property
    def x0(self) -> float:
        return float(np.mean([state.x0 for state in self.components]))

    @property
    def sigma(self) -> float:
        return max(state.sigma for state in self.components)

    @property
    def momentum_window(self) -> tuple[float, float]:
        return self._raw_window()

    def momentum_amplitude(self, k: Any) -> Any:
        return self._raw_amplitude(k) / self.norm

    def momentum_density(self, k: Any) -> Any:
        return np.abs(self.momentum_amplitude(k)) ** 2

    def position_amplitude(self, x: Any) -> Any:
        return (
            sum(weight * state.position_amplitude(x) for weight, state in self.terms)
            / self.norm
        )

    def check_placement(self, p: Potential) -> float:
        return max(state.check_placement(p) for state in self.components)

    def describe(self) -> dict[str, Any]:
        return {
            "components": [
                {"weight": [complex(w).real, complex(w).imag], **s.describe()}
                for w, s in self.terms
            ]
        }


InitialState = Union[GaussianState, GaussianSuperposition]
