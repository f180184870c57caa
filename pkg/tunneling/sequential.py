"""Delay and tunneling time as random variables of a sequential measurement.

An unsharp phase-space sampling with coherent states of momentum width
sigma is followed by the arrival-time measurement. Only the momentum
diagonal of the initial state enters the marginals, so a tabulated
momentum distribution is accepted wherever the position is not needed.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Union

import numpy as np
import pandas as pd
from django.core.exceptions import ValidationError
from scipy.integrate import cumulative_trapezoid, simpson
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq
from scipy.stats import ks_1samp, norm

from .arrival import GaussianLevel, closed_form_profile, gauss_legendre_grid
from .conf import get_thresholds
from .core_model import GaussianState, Potential, forbidden_region
from .dirichlet_povm import (
    b_rough,
    b_smeared,
    expansion_params,
    richardson_derivative,
)
from .exceptions import DegenerateJacobian, RegimeViolation
from .scattering import solution_provider
from .utils.logging import log_computation

logger = logging.getLogger(__name__)

QUANTILES = (0.05, 0.25, 0.5, 0.75, 0.95)
FINE_GRID = 1201


@dataclass(frozen=True)
class TabulatedMomentum:
    """Momentum diagonal <k|rho0|k> on a grid, with the mean start position."""

    k_grid: np.ndarray
    density: np.ndarray
    x0: float

    def __post_init__(self) -> None:
        if np.any(np.diff(self.k_grid) <= 0):
            raise ValidationError("Momentum grid must be strictly increasing")
        if np.any(self.density < 0):
            raise ValidationError("Momentum density must be non-negative")

    @property
    def mass(self) -> float:
        return float(simpson(self.density, x=self.k_grid))

    @property
    def k0(self) -> float:
        return float(simpson(self.density * self.k_grid, x=self.k_grid) / self.mass)

    @property
    def sigma(self) -> float:
        variance = simpson(self.density * (self.k_grid - self.k0) ** 2, x=self.k_grid)
        return float(math.sqrt(variance / self.mass))

    @property
    def momentum_window(self) -> tuple[float, float]:
        return float(self.k_grid[0]), float(self.k_grid[-1])

    def momentum_density(self, k: Any) -> Any:
        return np.interp(k, self.k_grid, self.density, left=0.0, right=0.0)

    def quantiles(self, levels: tuple[float, ...]) -> np.ndarray:
        cdf = cumulative_trapezoid(self.density, self.k_grid, initial=0.0)
        return np.interp(np.asarray(levels) * cdf[-1], cdf, self.k_grid)


MomentumSource = Union[GaussianState, TabulatedMomentum]


def _positive_window(rho0: MomentumSource) -> tuple[float, float]:
    k_min, k_max = rho0.momentum_window
    return max(k_min, 1e-3 * rho0.k0), k_max


def _quantiles(rho0: MomentumSource) -> np.ndarray:
    if isinstance(rho0, TabulatedMomentum):
        k = rho0.quantiles(QUANTILES)
    else:
        k = rho0.k0 + rho0.sigma * norm.ppf(QUANTILES)
    return k[k > 0]


def husimi_weight(state: GaussianState, x: Any, k: Any, sigma: float) -> Any:
    """<x k|rho0|x k> for a Gaussian rho0 and coherent states of width sigma."""
    delta_a, delta_0 = state.delta, 1.0 / (2.0 * sigma)
    s = delta_a**2 + delta_0**2
    return (
        2.0
        * delta_a
        * delta_0
        / s
        * np.exp(
            -((np.asarray(x) - state.x0) ** 2) / (2.0 * s)
            - 2.0 * (np.asarray(k) - state.k0) ** 2 * delta_a**2 * delta_0**2 / s
        )
    )


@dataclass(frozen=True)
class MomentumProfile:
    """lambda_k, xi_k, d_k and detector weights along a momentum grid."""

    k: np.ndarray
    lambda_k: np.ndarray
    xi_k: np.ndarray
    d_k: np.ndarray
    weight_sq: np.ndarray
    transmission: np.ndarray


def momentum_profile(
    potential: Potential, M: float, k_grid: np.ndarray, rough: bool = False
) -> MomentumProfile:
    provider = solution_provider(potential, M)
    weight_of = b_rough if rough else b_smeared
    lambda_k, xi_k, d_k, weight_sq, transmission = ([] for _ in range(5))
    for k in k_grid:
        lambda_k.append(expansion_params(lambda q: provider(q).T_plus, k).lambda_)
        xi_k.append(expansion_params(lambda q: b_smeared(provider(q)), k).xi)
        d_k.append(forbidden_region(potential, k, M)[2])
        sol = provider(k)
        weight_sq.append(abs(weight_of(sol)) ** 2)
        transmission.append(sol.transmission)
    return MomentumProfile(
        k=np.asarray(k_grid),
        lambda_k=np.array(lambda_k),
        xi_k=np.array(xi_k),
        d_k=np.array(d_k),
        weight_sq=np.array(weight_sq),
        transmission=np.array(transmission),
    )


@dataclass(frozen=True)
class JointDensity:
    t_grid: np.ndarray
    x_grid: np.ndarray
    k_grid: np.ndarray
    weight: np.ndarray
    values: np.ndarray

    def phase_space_mass(self) -> float:
        """Integral of the phase-space weight over dx dk / 2 pi."""
        inner = simpson(self.weight, x=self.k_grid, axis=1)
        return float(simpson(inner, x=self.x_grid) / (2.0 * math.pi))


@log_computation()
def joint_density(
    rho0: GaussianState,
    sigma: float,
    potential: Potential,
    M: float,
    L: float,
    x_grid: Any,
    k_grid: Any,
    t_grid: Any,
) -> JointDensity:
    """P(t, x, k) = <x k|rho0|x k> p_{x,k}(t) on a (t, x, k) grid.

    p_{x,k} is the closed form at level P1 for the coherent state centred
    at (x, k); it vanishes for k <= 0.
    """
    x_grid = np.asarray(x_grid, dtype=float)
    k_grid = np.asarray(k_grid, dtype=float)
    t_grid = np.asarray(t_grid, dtype=float)
    weight = husimi_weight(rho0, x_grid[:, None], k_grid[None, :], sigma)
    values = np.zeros((t_grid.size, x_grid.size, k_grid.size))
    positive = np.flatnonzero(k_grid > 0)
    profile = momentum_profile(potential, M, k_grid[positive])
    for index, (j, k) in enumerate(zip(positive, profile.k)):
        for i, x in enumerate(x_grid):
            t_m = M * (L - x + profile.lambda_k[index]) / k
            values[:, i, j] = weight[i, j] * closed_form_profile(
                t_grid,
                4.0 * profile.weight_sq[index],
                k,
                sigma,
                profile.xi_k[index],
                t_m,
                M,
                GaussianLevel.P1,
            )
    return JointDensity(
        t_grid=t_grid, x_grid=x_grid, k_grid=k_grid, weight=weight, values=values
    )


@dataclass(frozen=True)
class MarginalDensity:
    kind: str
    sigma: float
    t_grid: np.ndarray
    density: np.ndarray
    regime_ok: bool
    flags: dict[str, Any] = field(default_factory=dict)

    @property
    def integral(self) -> float:
        return float(simpson(self.density, x=self.t_grid))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "t_value": self.t_grid,
                "density": self.density,
                "regime_flag": np.full(self.t_grid.size, self.regime_ok),
            }
        )


def _marginal_regime(
    rho0: MomentumSource,
    profile: MomentumProfile,
    sigma: float,
    M: float,
    L: float,
    mass: np.ndarray,
) -> dict[str, Any]:
    thresholds = get_thresholds()
    support = mass > 1e-6 * mass.max()
    k = profile.k[support]
    t = M * (abs(rho0.x0) + L + profile.lambda_k[support]) / k
    spread = t**2 * sigma**4 / M**2
    xi = sigma * np.abs(profile.xi_k[support])
    violations = {}
    if spread.max() >= thresholds.sequential_spread_limit:
        violations["t^2*sigma^4/M^2 << 1"] = float(k[np.argmax(spread)])
    if xi.max() >= thresholds.sequential_xi_limit:
        violations["sigma*xi_k << 1"] = float(k[np.argmax(xi)])
    return violations


def _marginal(
    kind: str,
    center: Callable[[MomentumProfile], np.ndarray],
    rho0: MomentumSource,
    sigma: float,
    potential: Potential,
    M: float,
    L: float,
    t_grid: Any,
    force: bool,
    rough: bool,
    nodes: Optional[int],
) -> MarginalDensity:
    t_grid = np.asarray(t_grid, dtype=float)
    k_grid, weights = gauss_legendre_grid(
        *_positive_window(rho0), nodes or get_thresholds().k_nodes
    )
    profile = momentum_profile(potential, M, k_grid, rough=rough)
    mass = weights * rho0.momentum_density(k_grid)
    violations = _marginal_regime(rho0, profile, sigma, M, L, mass)
    if violations:
        condition = ", ".join(violations)
        message = f"Sequential marginal outside its regime: {condition}"
        if not force:
            raise RegimeViolation(message, condition=condition, offending_k=violations)
        logger.warning("%s; continuing (forced)", message)
    k = profile.k
    kernel = np.exp(
        -2.0 * (k * sigma / M) ** 2 * (t_grid[:, None] - center(profile)[None, :]) ** 2
    )
    density = math.sqrt(8.0 * math.pi * sigma**2) * kernel @ (
        mass * profile.weight_sq * np.abs(k) / M
    )
    return MarginalDensity(
        kind=kind,
        sigma=sigma,
        t_grid=t_grid,
        density=density,
        regime_ok=not violations,
        flags={"violations": violations, "rough_weight": rough},
    )


def marginal_delay(
    rho0: MomentumSource,
    sigma: float,
    potential: Potential,
    M: float,
    L: float,
    t_grid: Any,
    force: bool = False,
    rough: bool = False,
    nodes: Optional[int] = None,
) -> MarginalDensity:
    """P_d on the delay-time grid.

    Raises:
        RegimeViolation: spreading or xi condition fails for some k in the
            support (unless ``force``).
    """
    return _marginal(
        "delay",
        lambda profile: M * profile.lambda_k / profile.k,
        rho0,
        sigma,
        potential,
        M,
        L,
        t_grid,
        force,
        rough,
        nodes,
    )


def marginal_tunneling(
    rho0: MomentumSource,
    sigma: float,
    potential: Potential,
    M: float,
    L: float,
    t_grid: Any,
    force: bool = False,
    rough: bool = False,
    nodes: Optional[int] = None,
) -> MarginalDensity:
    return _marginal(
        "tunneling",
        lambda profile: M * (profile.lambda_k + profile.d_k) / profile.k,
        rho0,
        sigma,
        potential,
        M,
        L,
        t_grid,
        force,
        rough,
        nodes,
    )


def rho_cross(
    rho0: MomentumSource, potential: Potential, M: float, nodes: int = FINE_GRID
) -> TabulatedMomentum:
    """Transmitted momentum diagonal |T_k|^2 <k|rho0|k> (not normalized)."""
    k_grid = np.linspace(*_positive_window(rho0), nodes)
    provider = solution_provider(potential, M)
    transmission = np.array([provider(k).transmission for k in k_grid])
    return TabulatedMomentum(
        k_grid=k_grid,
        density=transmission * rho0.momentum_density(k_grid),
        x0=rho0.x0,
    )


def detected_fraction(
    rho0: MomentumSource, potential: Potential, M: float
) -> float:
    return rho_cross(rho0, potential, M).mass


@dataclass(frozen=True)
class SequentialDensity:
    sigma: float
    P_d: MarginalDensity
    P_tun: MarginalDensity
    norm: float

    @property
    def regime_d(self) -> bool:
        return self.P_d.regime_ok

    @property
    def regime_tun(self) -> bool:
        return self.P_tun.regime_ok

    def metadata(self) -> dict[str, Any]:
        return {
            "sigma": self.sigma,
            "norm": self.norm,
            "integral_d": self.P_d.integral,
            "integral_tun": self.P_tun.integral,
            "regime_d": self.regime_d,
            "regime_tun": self.regime_tun,
            "violations_d": self.P_d.flags["violations"],
            "violations_tun": self.P_tun.flags["violations"],
        }


@log_computation()
def sequential_density(
    rho0: MomentumSource,
    sigma: float,
    potential: Potential,
    M: float,
    L: float,
    t_d_grid: Any,
    t_grid: Any,
    force: bool = False,
) -> SequentialDensity:
    P_d = marginal_delay(rho0, sigma, potential, M, L, t_d_grid, force=force)
    P_tun = marginal_tunneling(rho0, sigma, potential, M, L, t_grid, force=force)
    return SequentialDensity(
        sigma=sigma,
        P_d=P_d,
        P_tun=P_tun,
        norm=detected_fraction(rho0, potential, M),
    )


def time_maps(
    potential: Potential, M: float
) -> tuple[Callable[[float], float], Callable[[float], float]]:
    """F_d(k) = M lambda_k / k and F_tun(k) = M (lambda_k + d_k) / k."""
    provider = solution_provider(potential, M)

    def lambda_of(k: float) -> float:
        return expansion_params(lambda q: provider(q).T_plus, k).lambda_

    def f_delay(k: float) -> float:
        return M * lambda_of(k) / k

    def f_tunneling(k: float) -> float:
        return M * (lambda_of(k) + forbidden_region(potential, k, M)[2]) / k

    return f_delay, f_tunneling


@dataclass(frozen=True)
class IdealDensity:
    kind: str
    t_grid: np.ndarray
    density: np.ndarray
    degenerate: np.ndarray
    regime_ok: bool

    @property
    def integral(self) -> float:
        return float(simpson(self.density, x=self.t_grid))

    def cdf(self) -> Callable[[Any], Any]:
        cumulative = cumulative_trapezoid(self.density, self.t_grid, initial=0.0)
        total = cumulative[-1]

        def evaluate(t: Any) -> Any:
            return np.interp(t, self.t_grid, cumulative, left=0.0, right=total) / total

        return evaluate

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "t_value": self.t_grid,
                "density": self.density,
                "regime_flag": np.full(self.t_grid.size, self.regime_ok),
            }
        )


def _pushforward(
    kind: str,
    F: Callable[[float], float],
    transmitted: TabulatedMomentum,
    t_grid: np.ndarray,
    regime_ok: bool,
    strict: bool,
) -> IdealDensity:
    thresholds = get_thresholds()
    k_grid = transmitted.k_grid
    values = np.array([F(k) for k in k_grid])
    density = np.zeros_like(t_grid)
    degenerate = np.zeros(t_grid.size, dtype=bool)
    for n, t in enumerate(t_grid):
        offset = values - t
        for i in np.flatnonzero(np.sign(offset[:-1]) * np.sign(offset[1:]) < 0):
            root = brentq(
                lambda k: F(k) - t, k_grid[i], k_grid[i + 1], rtol=1e-12
            )
            step = thresholds.derivative_step(root)
            slope = richardson_derivative(F, root, step)[0]
            if abs(slope) < thresholds.degenerate_jacobian:
                degenerate[n] = True
                if strict:
                    raise DegenerateJacobian(
                        f"|F'(k)| vanishes at k={root:.6g} (t={t:.6g})", k=root, t=t
                    )
                continue
            density[n] += float(transmitted.momentum_density(root)) / abs(slope)
    if degenerate.any():
        logger.warning(
            "Ideal %s density has %d grid points at a degenerate Jacobian",
            kind,
            int(degenerate.sum()),
        )
    return IdealDensity(
        kind=kind,
        t_grid=t_grid,
        density=density,
        degenerate=degenerate,
        regime_ok=regime_ok,
    )


@log_computation()
def ideal_distributions(
    rho0: MomentumSource,
    potential: Potential,
    M: float,
    t_grid: Any,
    sigma: Optional[float] = None,
    strict: bool = False,
) -> tuple[IdealDensity, IdealDensity]:
    """sigma-independent limits of P_d and P_tun by change of variables.

    ``sigma`` is only used to report whether the limit is licensed.

    Raises:
        DegenerateJacobian: a root has |F'(k)| below the cutoff and
            ``strict`` is set.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    transmitted = rho_cross(rho0, potential, M)
    f_delay, f_tunneling = time_maps(potential, M)
    cond_d = cond_t = True
    if sigma is not None:
        cond_d, cond_t, _ = regime_check(potential, sigma, rho0, M)
    return (
        _pushforward("delay", f_delay, transmitted, t_grid, cond_d, strict),
        _pushforward("tunneling", f_tunneling, transmitted, t_grid, cond_t, strict),
    )


def pushforward_check(
    rho0: MomentumSource,
    potential: Potential,
    M: float,
    ideal: IdealDensity,
    samples: int = 1_000_000,
    seed: int = 0,
) -> float:
    """KS distance between ``ideal`` and F(k) sampled from rho_cross."""
    transmitted = rho_cross(rho0, potential, M)
    f_delay, f_tunneling = time_maps(potential, M)
    F = f_delay if ideal.kind == "delay" else f_tunneling
    k_grid = transmitted.k_grid
    F_of = CubicSpline(k_grid, [F(k) for k in k_grid])
    cumulative = cumulative_trapezoid(transmitted.density, k_grid, initial=0.0)
    generator = np.random.default_rng(seed)
    drawn = np.interp(generator.random(samples) * cumulative[-1], cumulative, k_grid)
    result = ks_1samp(F_of(drawn), ideal.cdf())
    logger.info("Pushforward KS distance %.4g (%d samples)", result.statistic, samples)
    return float(result.statistic)


def regime_check(
    potential: Potential, sigma: float, rho0: MomentumSource, M: float
) -> tuple[bool, bool, dict[str, Any]]:
    """Ideal-limit conditions sigma|lambda_k| >> 1 and sigma(lambda_k + d_k) >> 1."""
    factor = get_thresholds().much_greater
    k = _quantiles(rho0)
    profile = momentum_profile(potential, M, k)
    delay = sigma * np.abs(profile.lambda_k)
    tunneling = sigma * (profile.lambda_k + profile.d_k)
    details = {
        "k": k.tolist(),
        "sigma_lambda": delay.tolist(),
        "sigma_lambda_plus_d": tunneling.tolist(),
        "factor": factor,
    }
    return bool(np.all(delay > factor)), bool(np.all(tunneling > factor)), details
