"""Time-of-arrival densities for a detector at x = L.

All spectral densities are Hermitian forms in the vector
``G[t, k] = w_k D_k c_k exp(-i k^2 t / 2M)`` over a Gauss-Legendre
momentum grid; only the kernel between k and k' differs between methods.
"""

import logging
import math
from dataclasses import dataclass, field
try:
    from enum import StrEnum
except ImportError:  # Python < 3.11
    from enum import Enum

    class StrEnum(str, Enum):
        __str__ = str.__str__
        __format__ = str.__format__
from typing import Any, Optional

import numpy as np
import pandas as pd
from django.core.exceptions import ValidationError
from scipy.integrate import simpson
from scipy.interpolate import CubicSpline
from scipy.signal import find_peaks
from scipy.special import erfc, roots_legendre

from .conf import get_thresholds
from .core_model import InitialState, Potential, forbidden_region
from .dirichlet_povm import (
    SQRT_2PI,
    DirichletMode,
    PovmWeight,
    TimeScales,
    dirichlet_mode,
    phase_time,
    povm_weight,
)
from .exceptions import GridTooCoarse, MultiPeak, RegimeViolation
from .scattering import ScatteringSolution, solution_provider
from .utils.logging import log_computation

logger = logging.getLogger(__name__)

# u-cutoff of the smearing kernel integral; exp(-U**4 / 2) is below 1e-22
SMEARING_CUTOFF = 3.2
SMEARING_PANEL_NODES = 16
SMEARING_TABLE_SIZE = 257


class ArrivalMethod(StrEnum):
    EXACT = "ExactQuadrature"
    SMEARED = "SmearedQuadrature"
    MONOCHROMATIC = "Monochromatic"
    P1 = "GaussianP1"
    P2 = "GaussianP2"
    P3 = "GaussianP3"
    ORACLE = "Oracle"


@dataclass(frozen=True)
class ArrivalDensity:
    t_grid: np.ndarray
    p: np.ndarray
    p_nodetect: float
    method: ArrivalMethod
    t_peak: float
    flags: dict[str, Any] = field(default_factory=dict)

    @property
    def detected(self) -> float:
        return float(simpson(self.p, x=self.t_grid))

    @property
    def peak_value(self) -> float:
        return float(self.p.max())

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"t": self.t_grid, "p": self.p})

    def metadata(self) -> dict[str, Any]:
        return {
            "method": str(self.method),
            "t_peak": self.t_peak,
            "p_nodetect": self.p_nodetect,
            "detected": self.detected,
            "flags": dict(self.flags),
        }


@dataclass(frozen=True)
class SpectralState:
    """Momentum-grid representation of the initial state in Dirichlet modes."""

    k_grid: np.ndarray
    weights: np.ndarray
    c_k: np.ndarray
    D_k: np.ndarray
    source: InitialState
    M: float
    L: float
    dropped_term_bound: float

    @property
    def energy_spread(self) -> float:
        """Relative momentum spread (std / mean) of |c_k|^2."""
        density = self.weights * np.abs(self.c_k) ** 2
        mean = np.sum(density * self.k_grid) / np.sum(density)
        variance = np.sum(density * (self.k_grid - mean) ** 2) / np.sum(density)
        return float(math.sqrt(variance) / mean)


def overlap_c_k(
    state: InitialState, sol: ScatteringSolution, mode: DirichletMode
) -> complex:
    """Overlap of the initial state with the half-line Dirichlet mode k.

    The counter-propagating contribution, bounded by exp(-k0^2 / 4 sigma^2),
    is omitted.
    """
    bracket = 1.0 + sol.f * np.exp(-2j * sol.k * mode.L)
    prefactor = mode.eta * SQRT_2PI * mode.C * np.conj(sol.A_minus * sol.A_plus)
    return complex(prefactor * bracket * state.momentum_amplitude(sol.k))


def gauss_legendre_grid(
    k_min: float, k_max: float, nodes: int
) -> tuple[np.ndarray, np.ndarray]:
    x, w = roots_legendre(nodes)
    half = (k_max - k_min) / 2.0
    return k_min + half * (x + 1.0), half * w


def spectral_state(
    state: InitialState,
    potential: Potential,
    M: float,
    L: float,
    nodes: Optional[int] = None,
) -> SpectralState:
    thresholds = get_thresholds()
    k_min, k_max = state.momentum_window
    k_min = max(k_min, 1e-3 * state.k0)
    k_grid, weights = gauss_legendre_grid(k_min, k_max, nodes or thresholds.k_nodes)
    provider = solution_provider(potential, M)
    c_k = np.empty(k_grid.size, dtype=complex)
    D_k = np.empty(k_grid.size, dtype=complex)
    for i, k in enumerate(k_grid):
        sol = provider(k)
        mode = dirichlet_mode(sol, L)
        c_k[i] = overlap_c_k(state, sol, mode)
        D_k[i] = mode.D_half
    dropped = max(
        math.exp(-(s.k0**2) / (4.0 * s.sigma**2)) for s in state.components
    )
    return SpectralState(
        k_grid=k_grid,
        weights=weights,
        c_k=c_k,
        D_k=D_k,
        source=state,
        M=M,
        L=L,
        dropped_term_bound=dropped,
    )


def spectral_norm(spec: SpectralState) -> float:
    """Sum of w_k |c_k|^2; one up to the window truncation."""
    return float(np.sum(spec.weights * np.abs(spec.c_k) ** 2))


def detection_mass(spec: SpectralState) -> float:
    """Arrival probability over all times, echoes from the wall included."""
    return float(
        math.pi / 2.0 * np.sum(spec.weights * np.abs(spec.D_k * spec.c_k) ** 2)
    )


def transmitted_fraction(state: InitialState, potential: Potential, M: float) -> float:
    """Integral of |T_k|^2 |psi(k)|^2 over the state's momentum window."""
    k_min, k_max = state.momentum_window
    k_grid, weights = gauss_legendre_grid(
        max(k_min, 1e-3 * state.k0), k_max, get_thresholds().k_nodes
    )
    provider = solution_provider(potential, M)
    transmission = np.array([provider(k).transmission for k in k_grid])
    return float(np.sum(weights * transmission * state.momentum_density(k_grid)))


def _validate_t_grid(t_grid: Any) -> np.ndarray:
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size < 3:
        raise ValidationError("Time grid needs at least three points")
    if np.any(np.diff(t_grid) <= 0):
        raise ValidationError("Time grid must be strictly increasing")
    return t_grid


def _check_nyquist(spec: SpectralState, t_grid: np.ndarray, M: float) -> None:
    spacing = float(np.max(np.diff(t_grid)))
    phase = (spec.k_grid.max() ** 2 - spec.k_grid.min() ** 2) * spacing / (2.0 * M)
    limit = get_thresholds().nyquist_limit
    if phase > limit:
        raise GridTooCoarse(
            f"Time step {spacing:.4g} too coarse for the momentum band: "
            f"phase step {phase:.3f} > {limit:.3f}",
            dt=spacing,
            phase_step=phase,
        )


def _amplitudes(spec: SpectralState, t_grid: np.ndarray) -> np.ndarray:
    vector = spec.weights * spec.D_k * spec.c_k
    return vector[None, :] * np.exp(
        -1j * np.outer(t_grid, spec.k_grid**2) / (2.0 * spec.M)
    )


def _hermitian_form(G: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    return np.real(np.sum((G @ kernel) * np.conj(G), axis=1))


def _refine_peak(t_grid: np.ndarray, p: np.ndarray, index: int) -> float:
    if index == 0 or index == len(p) - 1:
        return float(t_grid[index])
    t = t_grid[index - 1 : index + 2]
    a, b, _ = np.polyfit(t - t[1], p[index - 1 : index + 2], 2)
    if a >= 0:
        return float(t_grid[index])
    return float(t[1] - b / (2.0 * a))


def finalize_density(
    t_grid: np.ndarray,
    raw: np.ndarray,
    method: ArrivalMethod,
    flags: Optional[dict[str, Any]] = None,
) -> ArrivalDensity:
    """Clamp round-off negatives, fix p_nodetect and locate the peak."""
    thresholds = get_thresholds()
    flags = dict(flags or {})
    minimum = float(raw.min())
    flags["min_before_clamp"] = minimum
    if minimum < -thresholds.negativity_clamp:
        logger.warning(
            "Arrival density (%s) has negative values down to %.3e",
            method,
            minimum,
        )
        flags["negative_values"] = True
    p = np.clip(raw, 0.0, None)
    detected = float(simpson(p, x=t_grid))
    p_nodetect = 1.0 - detected
    if p_nodetect < -thresholds.normalization_slack or p_nodetect > 1.0 + (
        thresholds.normalization_slack
    ):
        logger.warning(
            "Non-detection weight %.4g outside [0, 1] (%s)", p_nodetect, method
        )
        flags["p_nodetect_clipped"] = p_nodetect
    p_nodetect = min(max(p_nodetect, 0.0), 1.0)
    t_peak = _refine_peak(t_grid, p, int(np.argmax(p)))
    return ArrivalDensity(
        t_grid=t_grid,
        p=p,
        p_nodetect=p_nodetect,
        method=method,
        t_peak=t_peak,
        flags=flags,
    )


@log_computation()
def p_exact(spec: SpectralState, t_grid: Any) -> ArrivalDensity:
    """Arrival density in the tau-independent limit.

    Raises:
        GridTooCoarse: the time step under-resolves the momentum band.
    """
    t_grid = _validate_t_grid(t_grid)
    _check_nyquist(spec, t_grid, spec.M)
    k = spec.k_grid
    kernel = np.outer(k, k) / np.sqrt(k[:, None] ** 2 + k[None, :] ** 2)
    raw = _hermitian_form(_amplitudes(spec, t_grid), kernel) / (
        2.0 * math.sqrt(2.0) * spec.M
    )
    return finalize_density(
        t_grid,
        raw,
        ArrivalMethod.EXACT,
        {"dropped_term_bound": spec.dropped_term_bound},
    )


def smearing_kernel(epsilon: Any, tau: float) -> np.ndarray:
    """R(eps) for Gaussian smearing of width tau, by composite Gauss-Legendre.

    With v = 2 tau u^2 the integral reads
    4 sqrt(tau) * int_0^U exp(-u^4/2) [cos(2 eps tau u^2) + sin(2 eps tau u^2)] du.
    """
    epsilon = np.atleast_1d(np.asarray(epsilon, dtype=float))
    top_phase = 2.0 * float(epsilon.max()) * tau * SMEARING_CUTOFF**2
    panels = max(64, int(top_phase) + 1)
    x, w = roots_legendre(SMEARING_PANEL_NODES)
    edges = np.linspace(0.0, SMEARING_CUTOFF, panels + 1)
    half = (edges[1] - edges[0]) / 2.0
    u = ((edges[:-1] + half)[:, None] + half * x[None, :]).ravel()
    weights = np.tile(half * w, panels) * np.exp(-(u**4) / 2.0)
    argument = 2.0 * tau * np.outer(epsilon, u**2)
    return 4.0 * math.sqrt(tau) * ((np.cos(argument) + np.sin(argument)) @ weights)


@log_computation()
def p_full_smeared(spec: SpectralState, t_grid: Any, tau: float) -> ArrivalDensity:
    """Arrival density for Gaussian time smearing of width tau.

    Raises:
        RegimeViolation: the grid starts before smearing_start * tau.
    """
    if tau <= 0:
        raise ValidationError("Smearing width tau must be positive")
    t_grid = _validate_t_grid(t_grid)
    factor = get_thresholds().smearing_start
    if t_grid[0] < factor * tau:
        raise RegimeViolation(
            f"Smeared density needs t >= {factor:g} tau, "
            f"grid starts at {t_grid[0]:.4g}",
            condition="t_min >= smearing_start * tau",
            t_min=float(t_grid[0]),
            tau=tau,
        )
    _check_nyquist(spec, t_grid, spec.M)
    k, M = spec.k_grid, spec.M
    epsilon = (k[:, None] ** 2 + k[None, :] ** 2) / (4.0 * M)
    table = np.linspace(epsilon.min(), epsilon.max(), SMEARING_TABLE_SIZE)
    kernel_of = CubicSpline(table, smearing_kernel(table, tau))
    kernel = np.outer(k, k) * kernel_of(epsilon)
    raw = _hermitian_form(_amplitudes(spec, t_grid), kernel) / (
        8.0 * M * math.sqrt(2.0 * math.pi * M)
    )
    return finalize_density(
        t_grid,
        raw,
        ArrivalMethod.SMEARED,
        {"tau": tau, "min_epsilon_tau": float(epsilon.min() * tau)},
    )


@log_computation()
def p_monochromatic(
    spec: SpectralState, t_grid: Any, force: bool = False
) -> ArrivalDensity:
    """|z(t)|^2 with z the single momentum sum of D_k c_k sqrt(k / 4M).

    Raises:
        RegimeViolation: relative momentum spread above the monochromatic
            limit (unless ``force``).
    """
    t_grid = _validate_t_grid(t_grid)
    _check_nyquist(spec, t_grid, spec.M)
    spread = spec.energy_spread
    limit = get_thresholds().monochromatic_limit
    flags: dict[str, Any] = {"momentum_spread": spread}
    if spread > limit:
        message = f"Momentum spread {spread:.3g} exceeds monochromatic limit {limit:g}"
        if not force:
            raise RegimeViolation(
                message, condition="dk/k <= monochromatic_limit", spread=spread
            )
        logger.warning("%s; continuing (forced)", message)
        flags["regime_violation"] = "dk/k <= monochromatic_limit"
    G = _amplitudes(spec, t_grid)
    z = G @ np.sqrt(spec.k_grid / (4.0 * spec.M))
    return finalize_density(t_grid, np.abs(z) ** 2, ArrivalMethod.MONOCHROMATIC, flags)


class GaussianLevel(StrEnum):
    P1 = "P1"
    P2 = "P2"
    P3 = "P3"


_LEVEL_METHODS = {
    GaussianLevel.P1: ArrivalMethod.P1,
    GaussianLevel.P2: ArrivalMethod.P2,
    GaussianLevel.P3: ArrivalMethod.P3,
}


def closed_form_profile(
    t_grid: np.ndarray,
    weight_sq: float,
    k0: float,
    sigma: float,
    xi: float,
    t_m: float,
    M: float,
    level: GaussianLevel = GaussianLevel.P1,
) -> np.ndarray:
    """Gaussian arrival profile centred on t_m, without regime checks."""
    amplitude = weight_sq * math.exp(2.0 * sigma**2 * xi**2) * k0 / (4.0 * M)
    spreading = np.ones_like(t_grid)
    drift = t_grid
    if level != GaussianLevel.P3:
        spreading = 1.0 + 4.0 * t_grid**2 * sigma**4 / M**2
    if level == GaussianLevel.P1:
        drift = t_grid * (1.0 + 2.0 * xi * sigma**2 / k0)
    return (
        amplitude
        * np.sqrt(8.0 * math.pi * sigma**2 / spreading)
        * np.exp(-2.0 * k0**2 * sigma**2 / M**2 / spreading * (drift - t_m) ** 2)
    )


def _regime(
    value: float, limit: float, condition: str, force: bool, flags: dict[str, Any]
) -> None:
    if value < limit:
        return
    message = f"Condition {condition} fails: {value:.4g} >= {limit:g}"
    if not force:
        raise RegimeViolation(message, condition=condition, value=value)
    logger.warning("%s; continuing (forced)", message)
    flags.setdefault("regime_violations", []).append(condition)


@log_computation()
def p_gaussian_closed_form(
    state: InitialState,
    weight: PovmWeight,
    ts: TimeScales,
    level: GaussianLevel,
    M: float,
    L: float,
    t_grid: Any,
    force: bool = False,
) -> ArrivalDensity:
    """Closed-form Gaussian density at the requested approximation level.

    ``weight.B_detect`` is the position-averaged weight; ``ts`` supplies
    lambda and xi at k0.

    Raises:
        RegimeViolation: naming the first condition of the level that fails.
    """
    level = GaussianLevel(level)
    t_grid = _validate_t_grid(t_grid)
    thresholds = get_thresholds()
    k0, sigma = state.k0, state.sigma
    xi = ts.xi or 0.0
    lam = ts.lambda_
    t_m = M * (abs(state.x0) + L + lam) / k0
    flags: dict[str, Any] = {
        "level": str(level),
        "sigma_over_k0": sigma / k0,
        "negative_k_weight": 0.5 * float(erfc(k0 / (math.sqrt(2.0) * sigma))),
        "p2_parameter": abs(xi) * sigma**2 / k0,
        "p3_parameter": t_m**2 * sigma**4 / M**2,
        "t_m": t_m,
    }
    # P1 integrates the momentum profile over the whole real line
    _regime(
        flags["negative_k_weight"],
        thresholds.p1_tail_limit,
        "negative-k weight < p1_tail_limit",
        force,
        flags,
    )
    if level in (GaussianLevel.P2, GaussianLevel.P3):
        _regime(
            sigma / k0,
            thresholds.monochromatic_limit,
            "sigma/k0 < monochromatic_limit",
            force,
            flags,
        )
        _regime(
            flags["p2_parameter"],
            thresholds.p2_limit,
            "xi*sigma^2/k0 < p2_limit",
            force,
            flags,
        )
    if level == GaussianLevel.P3:
        _regime(
            flags["p3_parameter"],
            thresholds.p3_limit,
            "t_m^2*sigma^4/M^2 < p3_limit",
            force,
            flags,
        )

    raw = closed_form_profile(
        t_grid, abs(weight.B_detect) ** 2, k0, sigma, xi, t_m, M, level
    )
    return finalize_density(t_grid, raw, _LEVEL_METHODS[level], flags)


def gaussian_time_scales(
    state: InitialState, potential: Potential, M: float, L: float
) -> tuple[PovmWeight, TimeScales]:
    """Weight and (lambda, xi) at k0 for the closed forms."""
    provider = solution_provider(potential, M)
    d_k = forbidden_region(potential, state.k0, M)[2]
    ts = phase_time(provider, state.k0, M, d_k, sigma=state.sigma)
    return povm_weight(provider(state.k0), L), ts


def extract_times(
    density: ArrivalDensity,
    state: InitialState,
    potential: Potential,
    M: float,
    L: float,
) -> TimeScales:
    """Delay and tunneling times read off the peak of an arrival density.

    Raises:
        MultiPeak: a secondary maximum exceeds multi_peak_ratio of the peak.
    """
    p, t_grid = density.p, density.t_grid
    ratio = get_thresholds().multi_peak_ratio
    top = float(p.max())
    peaks, _ = find_peaks(p, height=ratio * top)
    if len(peaks) > 1:
        raise MultiPeak(
            f"{len(peaks)} maxima above {ratio:g} of the peak; "
            "tunneling time is undefined for this state",
            peak_times=[float(t_grid[i]) for i in peaks],
        )
    index = int(peaks[0]) if len(peaks) else int(np.argmax(p))
    if index in (0, len(p) - 1):
        logger.warning(
            "Arrival peak at the edge of the time grid (t=%.6g)", t_grid[index]
        )
    t_peak = _refine_peak(t_grid, p, index)
    k0 = state.k0
    t_d = t_peak - M * (abs(state.x0) + L) / k0
    d_k = forbidden_region(potential, k0, M)[2]
    return TimeScales(
        k0=k0,
        xi=None,
        lambda_=t_d * k0 / M,
        d_k=d_k,
        t_d=t_d,
        t_tun=t_d + M * d_k / k0,
    )

