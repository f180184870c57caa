"""Grid propagation used as an independent check of the arrival densities.

The restricted evolution is Crank-Nicolson on a uniform grid with a
Dirichlet node at x = L and a far Dirichlet wall at x_min. The companion
run used for the probability current has no wall at L and quadratic
complex absorbing layers at both ends.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

import numpy as np
import pandas as pd
from django.core.exceptions import ValidationError
from scipy.integrate import cumulative_trapezoid, quad_vec, simpson
from scipy.interpolate import CubicSpline
from scipy.sparse import diags
from scipy.sparse.linalg import splu
from scipy.special import roots_legendre

from .arrival import ArrivalDensity, ArrivalMethod, finalize_density
from .conf import get_thresholds
from .core_model import InitialState, Potential, Sampled
from .scattering import solution_provider
from .utils.logging import log_computation

logger = logging.getLogger(__name__)

# exp(-w**4 / 8 tau**2) is below exp(-40) beyond w**4 = 320 tau**2
SMEARING_EXPONENT = 40.0
PANEL_NODES = 16
WALL_CLEARANCE = 10
DELTA_ADVISORY = 1e-2


@dataclass(frozen=True)
class OracleGrid:
    x_min: float
    L: float
    dx: float
    dt: float

    def __post_init__(self) -> None:
        if self.dx <= 0 or self.dt <= 0:
            raise ValidationError("Grid steps dx and dt must be positive")
        if self.x_min >= self.L:
            raise ValidationError("Far wall must lie left of the detector")

    @property
    def x(self) -> np.ndarray:
        """Nodes from x_min to L inclusive; L is the last node."""
        n = int(round((self.L - self.x_min) / self.dx))
        return self.L - self.dx * np.arange(n, -1, -1)

    def refined(self) -> "OracleGrid":
        return OracleGrid(
            x_min=self.x_min, L=self.L, dx=self.dx / 2.0, dt=self.dt / 2.0
        )


@dataclass(frozen=True)
class GridWave:
    x_grid: np.ndarray
    psi: np.ndarray
    t: float
    dx: float
    dt: float

    @property
    def norm(self) -> float:
        return float(np.sum(np.abs(self.psi) ** 2) * self.dx)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {"x": self.x_grid, "re": self.psi.real, "im": self.psi.imag}
        )


@dataclass(frozen=True)
class Trajectory:
    """Wall derivative and norm of the restricted run at every step."""

    times: np.ndarray
    wall_derivative: np.ndarray
    norms: np.ndarray
    final: GridWave
    snapshots: tuple[GridWave, ...] = ()
    flags: dict[str, Any] = field(default_factory=dict)

    @property
    def norm_drift(self) -> float:
        return float(np.max(np.abs(self.norms - self.norms[0])))

    def wall_signal(self, omega: float) -> Callable[[np.ndarray], np.ndarray]:
        """Interpolated d_x psi(L, t), zero outside the propagated interval.

        The carrier exp(-i omega t) is removed before spline interpolation.
        """
        carrier = np.exp(1j * omega * self.times)
        envelope = self.wall_derivative * carrier
        real = CubicSpline(self.times, envelope.real)
        imag = CubicSpline(self.times, envelope.imag)
        start, stop = self.times[0], self.times[-1]

        def signal(t: np.ndarray) -> np.ndarray:
            t = np.asarray(t, dtype=float)
            inside = (t >= start) & (t <= stop)
            clipped = np.clip(t, start, stop)
            carrier = np.exp(-1j * omega * clipped)
            value = (real(clipped) + 1j * imag(clipped)) * carrier
            return np.where(inside, value, 0.0)

        return signal


@dataclass(frozen=True)
class FluxRecord:
    t_grid: np.ndarray
    J: np.ndarray
    probe: float
    flags: dict[str, Any] = field(default_factory=dict)

    @property
    def cumulative(self) -> np.ndarray:
        return cumulative_trapezoid(self.J, self.t_grid, initial=0.0)

    @property
    def transmitted(self) -> float:
        return float(self.cumulative[-1])

    def on(self, t_grid: np.ndarray) -> np.ndarray:
        return np.interp(t_grid, self.t_grid, self.J, left=0.0, right=0.0)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"t": self.t_grid, "J": self.J})


def grid_potential(p: Potential, x: np.ndarray, dx: float, M: float) -> np.ndarray:
    """Cell-averaged potential; point interactions become a single tall cell."""
    values = np.zeros_like(x)
    if isinstance(p, Sampled):
        values += p.value(x)
    else:
        lower, upper = x - dx / 2.0, x + dx / 2.0
        for left, right, height in p.slabs():
            overlap = np.clip(
                np.minimum(upper, right) - np.maximum(lower, left), 0.0, dx
            )
            values += height * overlap / dx
    for position, kappa in p.point_interactions():
        values[int(np.argmin(np.abs(x - position)))] += kappa / (M * dx)
    return values


def phase_error_estimate(k_max: float, dx: float, dt: float, M: float) -> float:
    omega = k_max**2 / (2.0 * M)
    return (k_max * dx) ** 2 / 12.0 + (omega * dt) ** 2 / 12.0


def _advisories(
    state: InitialState, potential: Potential, M: float, dx: float, dt: float
) -> dict[str, Any]:
    k_max = state.momentum_window[1]
    estimate = phase_error_estimate(k_max, dx, dt, M)
    flags: dict[str, Any] = {"phase_error": estimate}
    if estimate > get_thresholds().phase_error_limit:
        logger.warning(
            "CFL advisory: estimated phase error %.3g per unit phase (dx=%g, dt=%g)",
            estimate,
            dx,
            dt,
        )
        flags["cfl_advisory"] = True
    if potential.point_interactions() and k_max * dx >= DELTA_ADVISORY:
        logger.warning(
            "Point interaction resolved on a coarse grid: k*dx = %.3g", k_max * dx
        )
        flags["delta_advisory"] = True
    return flags


def _stepper(
    V: np.ndarray, dx: float, dt: float, M: float
) -> tuple[Any, Any]:
    """LU factor of (1 + i dt H/2) and the sparse (1 - i dt H/2)."""
    n = V.size
    kinetic = 1.0 / (2.0 * M * dx**2)
    main = 2.0 * kinetic + V
    off = -kinetic * np.ones(n - 1)
    half = 0.5j * dt
    implicit = diags(
        [half * off, 1.0 + half * main, half * off], [-1, 0, 1], format="csc"
    )
    explicit = diags(
        [-half * off, 1.0 - half * main, -half * off], [-1, 0, 1], format="csr"
    )
    return splu(implicit), explicit


def wall_derivative(psi_interior: np.ndarray, dx: float) -> complex:
    """Fourth-order one-sided d_x psi at the last node, where psi = 0."""
    p1, p2, p3, p4 = psi_interior[-1:-5:-1]
    return complex((-48.0 * p1 + 36.0 * p2 - 16.0 * p3 + 3.0 * p4) / (12.0 * dx))


@log_computation()
def propagate_restricted(
    psi0: InitialState,
    potential: Potential,
    M: float,
    grid: OracleGrid,
    n_steps: int,
    snapshot_every: Optional[int] = None,
) -> Trajectory:
    """Dirichlet evolution on (x_min, L) recording d_x psi(L, t) each step."""
    x = grid.x
    psi = np.asarray(psi0.position_amplitude(x), dtype=complex)
    psi[0] = psi[-1] = 0.0
    near_wall = float(np.sum(np.abs(psi[-WALL_CLEARANCE - 1 :]) ** 2) * grid.dx)
    if near_wall > 1e-10:
        raise ValidationError(
            f"Initial state has mass {near_wall:.3e} within "
            f"{WALL_CLEARANCE} cells of the detector"
        )
    flags = _advisories(psi0, potential, M, grid.dx, grid.dt)
    V = grid_potential(potential, x, grid.dx, M)[1:-1]
    lu, explicit = _stepper(V.astype(complex), grid.dx, grid.dt, M)
    inner = psi[1:-1]
    derivative = np.empty(n_steps + 1, dtype=complex)
    norms = np.empty(n_steps + 1)
    derivative[0] = wall_derivative(inner, grid.dx)
    norms[0] = np.sum(np.abs(inner) ** 2) * grid.dx
    snapshots = []
    for n in range(1, n_steps + 1):
        inner = lu.solve(explicit @ inner)
        derivative[n] = wall_derivative(inner, grid.dx)
        norms[n] = np.sum(np.abs(inner) ** 2) * grid.dx
        if snapshot_every and n % snapshot_every == 0:
            padded = np.concatenate(([0j], inner, [0j]))
            snapshots.append(GridWave(x, padded, n * grid.dt, grid.dx, grid.dt))
    times = grid.dt * np.arange(n_steps + 1)
    padded = np.concatenate(([0j], inner, [0j]))
    final = GridWave(x, padded, times[-1], grid.dx, grid.dt)
    return Trajectory(
        times=times,
        wall_derivative=derivative,
        norms=norms,
        final=final,
        snapshots=tuple(snapshots),
        flags=flags,
    )


def absorbing_layer(
    x: np.ndarray, width: float, strength: float
) -> np.ndarray:
    """Quadratic ramp of -i W(x) over ``width`` at both ends of the grid."""
    into_left = np.clip((x[0] + width - x) / width, 0.0, None)
    into_right = np.clip((x - (x[-1] - width)) / width, 0.0, None)
    return -1j * strength * (into_left**2 + into_right**2)


@log_computation()
def flux_arrival_density(
    psi0: InitialState,
    potential: Potential,
    M: float,
    L_probe: float,
    grid: OracleGrid,
    n_steps: int,
    layer_width: float = 20.0,
) -> FluxRecord:
    """Probability current at L_probe on a wall-free companion grid.

    The grid extends ``layer_width`` beyond ``grid.x_min`` and beyond the
    probe plus a clearance of the same size.
    """
    x_min = grid.x_min - layer_width
    x_max = L_probe + 2.0 * layer_width
    n = int(round((x_max - x_min) / grid.dx))
    x = x_min + grid.dx * np.arange(n + 1)
    energy = psi0.k0**2 / (2.0 * M)
    V = grid_potential(potential, x, grid.dx, M) + absorbing_layer(
        x, layer_width, 2.0 * energy
    )
    lu, explicit = _stepper(V[1:-1], grid.dx, grid.dt, M)
    psi = np.asarray(psi0.position_amplitude(x), dtype=complex)[1:-1]
    j = int(np.argmin(np.abs(x[1:-1] - L_probe)))
    current = np.empty(n_steps + 1)

    def measure(values: np.ndarray) -> float:
        gradient = (values[j + 1] - values[j - 1]) / (2.0 * grid.dx)
        return float(np.imag(np.conj(values[j]) * gradient) / M)

    current[0] = measure(psi)
    for step in range(1, n_steps + 1):
        psi = lu.solve(explicit @ psi)
        current[step] = measure(psi)
    times = grid.dt * np.arange(n_steps + 1)
    cumulative = cumulative_trapezoid(current, times, initial=0.0)
    slack = get_thresholds().normalization_slack
    flags = {}
    if cumulative.min() < -slack or cumulative.max() > 1.0 + slack:
        logger.warning(
            "Cumulative flux outside [0, 1]: min %.3g, max %.3g",
            cumulative.min(),
            cumulative.max(),
        )
        flags["cumulative_out_of_range"] = True
    return FluxRecord(
        t_grid=times, J=current, probe=float(x[1:-1][j]), flags=flags
    )


def free_propagator(s: np.ndarray, M: float) -> np.ndarray:
    """G_0(L, L | t' - t) as a function of s = t - t'; zero at s = 0."""
    s = np.asarray(s, dtype=float)
    safe = np.where(s == 0.0, 1.0, np.abs(s))
    value = np.sqrt(M / (2.0 * math.pi * safe)) * np.exp(0.25j * math.pi * np.sign(s))
    return np.where(s == 0.0, 0.0, value)


@log_computation()
def rho_small_scale(
    trajectory: Trajectory, t_grid: Any, M: float, omega: float
) -> np.ndarray:
    """rho(t, t') on a small time grid with the free propagator at (L, L)."""
    t_grid = np.asarray(t_grid, dtype=float)
    g = trajectory.wall_signal(omega)(t_grid)
    separation = t_grid[:, None] - t_grid[None, :]
    return np.outer(g, np.conj(g)) * free_propagator(separation, M) / (4.0 * M**2)


def hermiticity_residual(rho: np.ndarray) -> float:
    return float(np.max(np.abs(rho - np.conj(rho.T))))


def _cell_kernel(size: int) -> np.ndarray:
    """Cell-integrated |s - s'|^(-1/2) with the propagator phase, unit cells."""
    m = np.arange(-(size - 1), size, dtype=float)
    magnitude = (4.0 / 3.0) * (
        np.abs(m + 1) ** 1.5 - 2.0 * np.abs(m) ** 1.5 + np.abs(m - 1) ** 1.5
    )
    phase = np.where(
        m == 0, math.cos(math.pi / 4), np.exp(0.25j * math.pi * np.sign(m))
    )
    return magnitude * phase


def block_integrals(
    trajectory: Trajectory,
    t_grid: Any,
    M: float,
    omega: float,
    trials: int = 50,
    seed: int = 0,
) -> np.ndarray:
    """Integrals of rho over random squares [a, b]^2 of a uniform time grid."""
    t_grid = np.asarray(t_grid, dtype=float)
    h = float(t_grid[1] - t_grid[0])
    g = trajectory.wall_signal(omega)(t_grid)
    size = t_grid.size
    kernel = _cell_kernel(size)
    scale = h**1.5 * math.sqrt(M / (2.0 * math.pi)) / (4.0 * M**2)
    generator = np.random.default_rng(seed)
    results = np.empty(trials, dtype=complex)
    for n in range(trials):
        a, b = np.sort(generator.choice(size, size=2, replace=False))
        segment = g[a : b + 1]
        index = np.arange(segment.size)
        block = kernel[(index[:, None] - index[None, :]) + size - 1]
        results[n] = scale * (segment @ block @ np.conj(segment))
    return results


def reflection_correction(
    potential: Potential, M: float, L: float, k_max: float, nodes: int = 8192
) -> Callable[[np.ndarray], np.ndarray]:
    """Barrier-reflected part of the wall-free propagator at (L, L).

    Returned in the same orientation as ``free_propagator``.
    """
    k, w = roots_legendre(nodes)
    k = k_max / 2.0 * (k + 1.0)
    w = k_max / 2.0 * w
    provider = solution_provider(potential, M)
    keep = k > 1e-6
    k, w = k[keep], w[keep]
    echo = np.array([provider(q).R_minus for q in k]) * np.exp(2j * k * L)

    weighted = w * echo.real / math.pi

    def correction(s: np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        result = np.empty(s.size, dtype=complex)
        for start in range(0, s.size, 256):
            chunk = s[start : start + 256]
            result[start : start + 256] = (
                np.exp(0.5j * np.outer(chunk, k**2) / M) @ weighted
            )
        return result

    return correction


@log_computation()
def smeared_density_from_rho(
    trajectory: Trajectory,
    t_grid: Any,
    M: float,
    tau: float,
    omega: float,
    correction: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> ArrivalDensity:
    """Gaussian-smeared diagonal of rho, halved for the half-axis convention.

    With v = w**2 the 1/sqrt(v) singularity of the propagator cancels
    against the Jacobian.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    top = (8.0 * tau**2 * SMEARING_EXPONENT) ** 0.25
    panels = max(64, int(omega * top**2) + 1)
    x, w = roots_legendre(PANEL_NODES)
    edges = np.linspace(0.0, top, panels + 1)
    half = (edges[1] - edges[0]) / 2.0
    nodes = ((edges[:-1] + half)[:, None] + half * x[None, :]).ravel()
    weights = np.tile(half * w, panels) * np.exp(-(nodes**4) / (8.0 * tau**2))
    kernel = 2.0 * math.sqrt(M / (2.0 * math.pi)) * np.exp(0.25j * math.pi) * np.ones(
        nodes.size
    )
    if correction is not None:
        kernel = kernel + 2.0 * nodes * correction(nodes**2)
    signal = trajectory.wall_signal(omega)
    shift = nodes**2 / 2.0
    raw = np.empty(t_grid.size)
    for i, t in enumerate(t_grid):
        product = signal(t + shift) * np.conj(signal(t - shift))
        raw[i] = np.sum(weights * 2.0 * np.real(kernel * product))
    raw *= 0.5 / (4.0 * M**2)
    return finalize_density(
        t_grid,
        raw,
        ArrivalMethod.ORACLE,
        {"tau": tau, "corrected": correction is not None, **trajectory.flags},
    )


@log_computation()
def kijowski_reference(
    state: InitialState, M: float, L: float, t_grid: Any
) -> ArrivalDensity:
    """Free-particle Kijowski density by adaptive momentum quadrature."""
    t_grid = np.asarray(t_grid, dtype=float)
    k_min, k_max = state.momentum_window

    def integrand(k: float) -> np.ndarray:
        value = (
            math.sqrt(k)
            * state.momentum_amplitude(k)
            * np.exp(1j * k * L - 0.5j * k**2 * t_grid / M)
        )
        return np.concatenate((value.real, value.imag))

    stacked, _ = quad_vec(
        integrand, max(k_min, 0.0), k_max, epsabs=1e-13, epsrel=1e-11, limit=2000
    )
    amplitude = stacked[: t_grid.size] + 1j * stacked[t_grid.size :]
    return finalize_density(
        t_grid, np.abs(amplitude) ** 2 / (2.0 * math.pi * M), ArrivalMethod.ORACLE
    )


def arrival_moments(density: ArrivalDensity) -> tuple[float, float]:
    """Mean and standard deviation of the normalized density."""
    t, p = density.t_grid, density.p
    mass = simpson(p, x=t)
    mean = simpson(t * p, x=t) / mass
    variance = simpson((t - mean) ** 2 * p, x=t) / mass
    return float(mean), float(math.sqrt(variance))
