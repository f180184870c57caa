"""Scattering states u_k^+ and u_k^- of a compact-support barrier.

u_k^+ is the left-incident solution. u_k^- is built from the right-incident
solution by removing its projection on u_k^+ in asymptotic-coefficient
space; S_k is minus that projection coefficient and vanishes up to
round-off for every real potential, so it is carried as a diagnostic.
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from django.core.exceptions import ValidationError

from .conf import Thresholds, get_thresholds
from .core_model import (
    DeltaBarrier,
    PointInteraction,
    Potential,
    Slab,
    SquareBarrier,
)
from .exceptions import EvanescentOverflow, RegimeViolation

logger = logging.getLogger(__name__)

INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class ScatteringSolution:
    k: float
    T_plus: complex
    R_plus: complex
    T_minus: complex
    R_minus: complex
    S: complex
    A_plus: complex = INV_SQRT_2PI
    A_minus: complex = INV_SQRT_2PI
    method: str = "transfer_matrix"

    @property
    def transmission(self) -> float:
        return abs(self.T_plus) ** 2

    @property
    def reflection(self) -> float:
        return abs(self.R_plus) ** 2

    @property
    def f(self) -> complex:
        """Coefficient of e^{-2ikL} in the detector bracket."""
        return (self.R_minus - self.T_plus * self.S).conjugate()

    def wronskian_residuals(self) -> dict[str, float]:
        T, R = self.T_plus, self.R_plus
        return {
            "transmission_identity": abs(T - (self.T_minus - self.S * R.conjugate())),
            "s_identity": abs(
                self.S - (T.conjugate() * self.R_minus + self.T_minus * R.conjugate())
            ),
            "flux_plus": abs(abs(T) ** 2 + abs(R) ** 2 - 1.0),
            "flux_minus": abs(
                abs(self.T_minus) ** 2 + abs(self.R_minus) ** 2 - 1.0 - abs(self.S) ** 2
            ),
        }

    def max_residual(self) -> float:
        return max(self.wronskian_residuals().values())

    def u_plus(self, x: float) -> complex:
        """Asymptotic form of u_k^+ outside the support."""
        k = self.k
        if x < 0:
            return self.A_plus * (
                np.exp(1j * k * x) + self.R_plus * np.exp(-1j * k * x)
            )
        return self.A_plus * self.T_plus * np.exp(1j * k * x)

    def u_minus(self, x: float) -> complex:
        k = self.k
        if x < 0:
            return self.A_minus * (
                self.T_minus * np.exp(-1j * k * x) + self.S * np.exp(1j * k * x)
            )
        return self.A_minus * (np.exp(-1j * k * x) + self.R_minus * np.exp(1j * k * x))


def _slab_step(
    psi: complex, dpsi: complex, width: float, height: float, k: float, M: float
) -> tuple[complex, complex, float]:
    """Carry (psi, psi') leftwards across a slab; returns the log of the scale."""
    g2 = 2.0 * M * height - k**2
    gamma = complex(np.emath.sqrt(g2))
    growth = gamma.real * width
    cap = get_thresholds().evanescent_cap
    if growth > cap:
        raise EvanescentOverflow(
            f"Evanescent growth {growth:.1f} exceeds {cap:g} across one segment",
            growth=growth,
            width=width,
            height=height,
            k=k,
        )
    if gamma.real > 0:
        decay = np.exp(-2.0 * gamma * width)
        c = (1.0 + decay) / 2.0
        s = (1.0 - decay) / (2.0 * gamma)
        log_scale = growth
    elif gamma == 0:
        c, s, log_scale = 1.0 + 0j, complex(width), 0.0
    else:
        c = np.cosh(gamma * width)
        s = np.sinh(gamma * width) / gamma
        log_scale = 0.0
    return c * psi - s * dpsi, -g2 * s * psi + c * dpsi, log_scale


def _left_incident(
    slabs: tuple[Slab, ...],
    points: tuple[PointInteraction, ...],
    k: float,
    M: float,
) -> tuple[complex, complex]:
    """(T, R) of the left-incident solution by right-to-left propagation."""
    events: list[tuple[float, int, tuple]] = []
    for left, right, height in slabs:
        events.append((right, 0, (left, right, height)))
    for position, kappa in points:
        events.append((position, 1, (position, kappa)))
    events.sort(key=lambda e: (e[0], -e[1]), reverse=True)

    edge = events[0][0] if events else 0.0
    psi = np.exp(1j * k * edge)
    dpsi = 1j * k * psi
    log_scale = 0.0
    x = edge
    for _, is_point, payload in events:
        if is_point:
            position, kappa = payload
            psi, dpsi, _ = _slab_step(psi, dpsi, x - position, 0.0, k, M)
            dpsi = dpsi - 2.0 * kappa * psi
            x = position
        else:
            left, right, height = payload
            if x > right:
                psi, dpsi, _ = _slab_step(psi, dpsi, x - right, 0.0, k, M)
            psi, dpsi, grown = _slab_step(psi, dpsi, right - left, height, k, M)
            log_scale += grown
            x = left
        scale = math.hypot(abs(psi), abs(dpsi) / k)
        psi, dpsi = psi / scale, dpsi / scale
        log_scale += math.log(scale)

    incoming = (psi + dpsi / (1j * k)) * np.exp(-1j * k * x) / 2.0
    outgoing = (psi - dpsi / (1j * k)) * np.exp(1j * k * x) / 2.0
    return complex(np.exp(-log_scale) / incoming), complex(outgoing / incoming)


def _orthogonalize(
    T_plus: complex, R_plus: complex, t_right: complex, r_right: complex
) -> tuple[complex, complex, complex]:
    projection = (R_plus.conjugate() * t_right + T_plus.conjugate() * r_right) / 2.0
    return t_right - projection * R_plus, r_right - projection * T_plus, -projection


def solve_modes(p: Potential, k: float, M: float) -> ScatteringSolution:
    """Scattering coefficients of u_k^+ and u_k^- for one wave number.

    Results are cached per threshold set, so an ``override_thresholds``
    block never sees solutions computed under other limits.

    Raises:
        EvanescentOverflow: a single segment is too opaque for the transfer
            matrix; use ``long_barrier_limit`` for such barriers.
    """
    return _solve_modes(p, k, M, get_thresholds())


@lru_cache(maxsize=8192)
def _solve_modes(
    p: Potential, k: float, M: float, thresholds: Thresholds
) -> ScatteringSolution:
    if k <= 0:
        raise ValidationError("Wave number k must be positive")
    T_plus, R_plus = _left_incident(p.slabs(), p.point_interactions(), k, M)
    if p.is_parity_symmetric:
        t_right, r_right = T_plus, R_plus
    else:
        mirror = p.mirrored()
        t_right, r_right = _left_incident(
            mirror.slabs(), mirror.point_interactions(), k, M
        )
    T_minus, R_minus, S = _orthogonalize(T_plus, R_plus, t_right, r_right)
    solution = ScatteringSolution(
        k=k, T_plus=T_plus, R_plus=R_plus, T_minus=T_minus, R_minus=R_minus, S=S
    )
    residual = solution.max_residual()
    if residual > thresholds.wronskian_tolerance:
        logger.warning(
            "Wronskian residual %.3e at k=%.6g exceeds tolerance (|S|=%.3e)",
            residual,
            k,
            abs(S),
        )
    return solution


def clear_solution_cache() -> None:
    _solve_modes.cache_clear()


def square_barrier_analytic(
    V0: float, d: float, k: float, M: float
) -> tuple[complex, complex]:
    """Closed-form (T, R) for a barrier of height V0 on [-d/2, d/2].

    Above the barrier gamma continues to i*sqrt(k**2 - 2M V0); the
    evaluation is continuous through k**2 = 2M V0.
    """
    gamma = complex(np.emath.sqrt(2.0 * M * V0 - k**2))
    gd = gamma * d
    if gamma.real > 0:
        decay = np.exp(-2.0 * gd)
        cosh_scaled = (1.0 + decay) / 2.0
        sinh_scaled = (1.0 - decay) / (2.0 * gamma)
        damping = np.exp(-gd.real)
    elif gamma == 0:
        cosh_scaled, sinh_scaled, damping = 1.0 + 0j, complex(d), 1.0
    else:
        cosh_scaled, sinh_scaled, damping = np.cosh(gd), np.sinh(gd) / gamma, 1.0
    denominator = cosh_scaled + 1j * (gamma**2 - k**2) * sinh_scaled / (2.0 * k)
    T = np.exp(-1j * k * d) * damping / denominator
    R = -1j * (k**2 + gamma**2) * sinh_scaled / (2.0 * k) * np.exp(-1j * k * d)
    R = R / denominator
    return complex(T), complex(R)


def delta_barrier_analytic(kappa: float, k: float) -> tuple[complex, complex]:
    """(T, R) for V = (kappa/M) delta(x).

    R is taken in the form -i kappa / (k + i kappa), the one compatible
    with |T|^2 + |R|^2 = 1 and Re(conj(T) R) = 0.
    """
    if k <= 0:
        raise ValidationError("Wave number k must be positive")
    T = 1.0 / (1.0 + 1j * kappa / k)
    R = -1j * kappa / (k + 1j * kappa)
    return complex(T), complex(R)


def long_barrier_limit(
    V0: float, d: float, k: float, M: float
) -> tuple[complex, complex]:
    """Opaque-barrier asymptotics of the square-barrier coefficients.

    Raises:
        RegimeViolation: gamma*d is below the long-barrier threshold.
    """
    threshold = get_thresholds().long_barrier_min
    g2 = 2.0 * M * V0 - k**2
    gamma = math.sqrt(g2) if g2 > 0 else 0.0
    if gamma * d < threshold:
        raise RegimeViolation(
            f"Long-barrier limit needs gamma*d >= {threshold:g}, got {gamma * d:.4g}",
            condition="gamma*d >= long_barrier_min",
            gamma_d=gamma * d,
        )
    phase = np.exp(-1j * k * d)
    norm = gamma**2 + k**2
    T = (
        phase
        * math.exp(-gamma * d)
        * 4.0
        * k
        * gamma
        / norm**2
        * (2.0 * k * gamma - 1j * (gamma**2 - k**2))
    )
    R = phase * (-(gamma**2 - k**2) - 2j * k * gamma) / norm
    return complex(T), complex(R)


def scattering_solution(p: Potential, k: float, M: float) -> ScatteringSolution:
    """``solve_modes`` with the opaque square barrier routed to its asymptotics."""
    try:
        return solve_modes(p, k, M)
    except EvanescentOverflow:
        if not isinstance(p, SquareBarrier):
            raise
        logger.info("Using long-barrier asymptotics at k=%.6g", k)
        T, R = long_barrier_limit(p.V0, p.d, k, M)
        return ScatteringSolution(
            k=k, T_plus=T, R_plus=R, T_minus=T, R_minus=R, S=0j, method="long_barrier"
        )


def analytic_solution(p: Potential, k: float, M: float) -> ScatteringSolution:
    """Closed-form solution for the symmetric models that have one."""
    if isinstance(p, SquareBarrier):
        T, R = square_barrier_analytic(p.V0, p.d, k, M)
    elif isinstance(p, DeltaBarrier):
        T, R = delta_barrier_analytic(p.kappa, k)
    else:
        raise ValidationError(f"No closed form for {type(p).__name__}")
    return ScatteringSolution(
        k=k, T_plus=T, R_plus=R, T_minus=T, R_minus=R, S=0j, method="analytic"
    )


def solution_provider(
    p: Potential, M: float
) -> Callable[[float], ScatteringSolution]:
    """k -> ScatteringSolution for a fixed barrier and mass."""

    def provider(k: float) -> ScatteringSolution:
        return scattering_solution(p, float(k), M)

    return provider
