"""Dirichlet modes at the detector, the POVM weight B_k and the time scales.

The displayed constants C_k and D_k normalize v_k on the full line. The
arrival densities need the modes normalized on (-inf, L); ``eta`` is the
factor that maps one onto the other, fixed by the amplitude of the
incoming plane wave on the left of the barrier. In that normalization the
detector weight becomes ``B_half = eta**2 * B`` and its average over the
detector position is ``2 * B_tilde``.
"""

import logging
import math
from dataclasses import asdict, dataclass
from typing import Any, Callable, Optional

import numpy as np

from .conf import get_thresholds
from .exceptions import PhaseUnwrapFailure, ResonantDenominator, ZeroTransmission
from .scattering import ScatteringSolution

logger = logging.getLogger(__name__)

SQRT_2PI = math.sqrt(2.0 * math.pi)

SolutionFn = Callable[[float], ScatteringSolution]


@dataclass(frozen=True)
class DirichletMode:
    k: float
    L: float
    C: float
    D: complex
    eta: float
    solution: ScatteringSolution

    @property
    def D_half(self) -> complex:
        """Tail amplitude of the mode normalized on the half line x < L."""
        return self.eta * self.D

    @property
    def D_wave(self) -> complex:
        """Amplitude of each travelling component of the half-line tail.

        ``D_half * sin k(L-x)`` splits into ``e^{+-ik(L-x)}`` waves of amplitude
        ``D_half / 2i``; for a free particle its modulus is the plane-wave
        normalization ``(2*pi)**-0.5``.
        """
        return self.D_half / 2j

    def value(self, x: float) -> complex:
        """v_k(x) from the asymptotic forms, valid outside the support."""
        sol = self.solution
        phase = np.exp(2j * self.k * self.L)
        return complex(
            self.C
            * (
                sol.A_minus * (1.0 + sol.R_minus * phase) * sol.u_plus(x)
                - sol.A_plus * sol.T_plus * phase * sol.u_minus(x)
            )
        )


def dirichlet_mode(sol: ScatteringSolution, L: float) -> DirichletMode:
    k = sol.k
    wall = np.exp(2j * k * L)
    C = 1.0 / math.sqrt(
        abs(sol.A_minus) ** 2 * abs(1.0 + sol.R_minus * wall) ** 2
        + abs(sol.A_plus) ** 2 * abs(sol.T_plus) ** 2
    )
    D = -2j * C * sol.A_minus * sol.A_plus * sol.T_plus * np.exp(1j * k * L)
    incoming = C * sol.A_minus * sol.A_plus * (
        1.0 + (sol.R_minus - sol.T_plus * sol.S) * wall
    )
    return DirichletMode(
        k=k, L=L, C=C, D=complex(D), eta=1.0 / (SQRT_2PI * abs(incoming)), solution=sol
    )


def b_coefficient(sol: ScatteringSolution, L: float) -> complex:
    """Detector weight B_k for a sharp detector at x = L."""
    k = sol.k
    C = dirichlet_mode(sol, L).C
    bracket = 1.0 + sol.f * np.exp(-2j * k * L)
    return complex(
        -2j
        * SQRT_2PI
        * C**2
        * abs(sol.A_minus) ** 2
        * abs(sol.A_plus) ** 2
        * bracket
        * sol.T_plus
    )


def b_half(sol: ScatteringSolution, L: float) -> complex:
    mode = dirichlet_mode(sol, L)
    return mode.eta**2 * b_coefficient(sol, L)


def b_smeared(sol: ScatteringSolution) -> complex:
    """B_k averaged over the detector position."""
    a_minus, a_plus = abs(sol.A_minus) ** 2, abs(sol.A_plus) ** 2
    denominator = (
        a_minus * (1.0 + abs(sol.R_minus) ** 2) + a_plus * abs(sol.T_plus) ** 2
    )
    return complex(-2j * SQRT_2PI * a_minus * a_plus / denominator * sol.T_plus)


def b_rough(sol: ScatteringSolution) -> complex:
    return complex(-1j * sol.T_plus / SQRT_2PI)


@dataclass(frozen=True)
class PovmWeight:
    k: float
    L: float
    B: complex
    B_half: complex
    B_tilde: complex
    B_rough: complex

    @property
    def B_detect(self) -> complex:
        """Position-averaged weight in the half-line normalization."""
        return 2.0 * self.B_tilde


def povm_weight(sol: ScatteringSolution, L: float) -> PovmWeight:
    return PovmWeight(
        k=sol.k,
        L=L,
        B=b_coefficient(sol, L),
        B_half=b_half(sol, L),
        B_tilde=b_smeared(sol),
        B_rough=b_rough(sol),
    )


@dataclass(frozen=True)
class ExpansionParams:
    xi: float
    lambda_: float
    xi_coarse: float
    lambda_coarse: float


def richardson_derivative(
    func: Callable[[float], Any], k0: float, h: float
) -> tuple[Any, Any]:
    """Central difference at steps h and h/2 plus one Richardson step."""
    coarse = (func(k0 + h) - func(k0 - h)) / (2.0 * h)
    fine = (func(k0 + h / 2.0) - func(k0 - h / 2.0)) / h
    return (4.0 * fine - coarse) / 3.0, fine


def _log_ratio(
    b_fn: Callable[[float], complex], k0: float
) -> Callable[[float], complex]:
    reference = b_fn(k0)
    if abs(reference) < get_thresholds().zero_transmission:
        raise ZeroTransmission(
            f"Amplitude vanishes at k0={k0}", k0=k0, magnitude=abs(reference)
        )
    limit = get_thresholds().phase_jump

    def log_ratio(k: float) -> complex:
        value = complex(np.log(b_fn(k) / reference))
        if abs(value.imag) > limit:
            raise PhaseUnwrapFailure(
                f"Phase jumps by {value.imag:.3f} rad between k0={k0} and k={k}",
                k0=k0,
                k=k,
                jump=value.imag,
            )
        return value

    return log_ratio


def expansion_params(
    b_fn: Callable[[float], complex], k0: float, h: Optional[float] = None
) -> ExpansionParams:
    """xi and lambda of the linear expansion of log(sqrt(k) B_k) around k0.

    Raises:
        PhaseUnwrapFailure: arg B moves by more than the phase-jump limit
            across the difference stencil.
    """
    step = h if h is not None else get_thresholds().derivative_step(k0)
    derivative, coarse = richardson_derivative(_log_ratio(b_fn, k0), k0, step)
    return ExpansionParams(
        xi=1.0 / (2.0 * k0) + derivative.real,
        lambda_=derivative.imag,
        xi_coarse=1.0 / (2.0 * k0) + coarse.real,
        lambda_coarse=coarse.imag,
    )


@dataclass(frozen=True)
class TimeScales:
    k0: float
    xi: Optional[float]
    lambda_: float
    d_k: float
    t_d: float
    t_tun: float
    uncertainty: Optional[float] = None

    def as_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data["lambda"] = data.pop("lambda_")
        return data


def phase_time(
    sol_fn: SolutionFn,
    k0: float,
    M: float,
    d_k: float,
    sigma: Optional[float] = None,
    a_k0: float = 0.0,
) -> TimeScales:
    """Delay and tunneling times from the phase of T_k^+ (position-averaged).

    Raises:
        ZeroTransmission: |T(k0)| is below the underflow cutoff.
    """
    transmitted = sol_fn(k0).T_plus
    if abs(transmitted) < get_thresholds().zero_transmission:
        raise ZeroTransmission(
            f"Transmission amplitude vanishes at k0={k0}", k0=k0
        )
    lam = expansion_params(lambda k: sol_fn(k).T_plus, k0).lambda_
    xi = expansion_params(lambda k: b_smeared(sol_fn(k)), k0).xi
    t_d = M * lam / k0
    t_tun = M * (lam + d_k) / k0
    if t_tun < 0:
        logger.warning("Negative tunneling time %.6g at k0=%.6g", t_tun, k0)
    uncertainty = None
    if sigma is not None:
        uncertainty = M / (k0 * sigma) + abs(a_k0) * sigma
    return TimeScales(
        k0=k0,
        xi=xi,
        lambda_=lam,
        d_k=d_k,
        t_d=t_d,
        t_tun=t_tun,
        uncertainty=uncertainty,
    )


def lambda_full(sol_fn: SolutionFn, k0: float, L: float) -> float:
    """Unsmeared lambda including the detector-position oscillation.

    Raises:
        ResonantDenominator: 1 + f e^{-2ik0L} is numerically zero.
    """
    sol = sol_fn(k0)
    rotation = np.exp(-2j * k0 * L)
    denominator = 1.0 + sol.f * rotation
    if abs(denominator) < get_thresholds().resonant_denominator:
        raise ResonantDenominator(
            f"|1 + f e^(-2ikL)| = {abs(denominator):.3e} at k0={k0}, L={L}",
            k0=k0,
            L=L,
        )
    step = get_thresholds().derivative_step(k0)
    f_prime, _ = richardson_derivative(lambda k: sol_fn(k).f, k0, step)
    phase_term = expansion_params(lambda k: sol_fn(k).T_plus, k0, step).lambda_
    oscillation = (f_prime - 2j * L * sol.f) * rotation / denominator
    return float(phase_term + oscillation.imag)


def lambda_parity(sol_fn: SolutionFn, k0: float, L: float) -> float:
    """Closed form of ``lambda_full`` for parity-symmetric barriers.

    With R = r e^{i theta} and phi = 2 k0 L + theta this is
    [theta'(1 + r cos phi) - r' sin phi - 2 L r (r + cos phi)]
    / (1 + r^2 + 2 r cos phi); theta' equals d arg T / dk here.
    """
    step = get_thresholds().derivative_step(k0)
    reflected = sol_fn(k0).R_plus
    theta_prime = expansion_params(lambda k: sol_fn(k).T_plus, k0, step).lambda_
    r = abs(reflected)
    if r == 0.0:
        return theta_prime
    r_prime, _ = richardson_derivative(lambda k: abs(sol_fn(k).R_plus), k0, step)
    phi = 2.0 * k0 * L + float(np.angle(reflected))
    numerator = (
        theta_prime * (1.0 + r * math.cos(phi))
        - r_prime.real * math.sin(phi)
        - 2.0 * L * r * (r + math.cos(phi))
    )
    return numerator / (1.0 + r**2 + 2.0 * r * math.cos(phi))


def lambda_smeared(
    sol_fn: SolutionFn, k0: float, L0: float, width: float, nodes: int = 40
) -> float:
    """Gaussian average of ``lambda_full`` over detector positions."""
    points, weights = np.polynomial.hermite.hermgauss(nodes)
    values = [lambda_full(sol_fn, k0, L0 + width * y) for y in points]
    return float(np.dot(weights, values) / math.sqrt(math.pi))


@dataclass(frozen=True)
class UncertaintyBound:
    total: float
    distinguishable: bool
    minimum: float
    optimal_sigma: float


def uncertainty_bound(
    ts: TimeScales, a_k0: float, sigma: float, M: float, k0: float
) -> UncertaintyBound:
    """Peak-position uncertainty of the tunneling time and its resolvability."""
    factor = get_thresholds().much_greater
    total = M / (k0 * sigma) + abs(a_k0) * sigma
    scale = math.sqrt(M * abs(a_k0) / k0)
    distinguishable = ts.t_tun > factor * scale and sigma * abs(ts.lambda_) > factor
    optimal = math.sqrt(M / (k0 * abs(a_k0))) if a_k0 else math.inf
    return UncertaintyBound(
        total=total,
        distinguishable=bool(distinguishable),
        minimum=2.0 * scale,
        optimal_sigma=optimal,
    )
