"""Oracle comparison cases: grid propagation against the spectral densities."""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np
import pandas as pd
from django.core.exceptions import ValidationError
from scipy.integrate import simpson

from .arrival import ArrivalDensity, p_exact, p_monochromatic, spectral_state
from .core_model import DeltaBarrier, Free, GaussianState, Potential, SquareBarrier
from .oracle import (
    FluxRecord,
    OracleGrid,
    Trajectory,
    block_integrals,
    flux_arrival_density,
    hermiticity_residual,
    kijowski_reference,
    propagate_restricted,
    reflection_correction,
    rho_small_scale,
    smeared_density_from_rho,
)
from .utils.logging import log_computation

logger = logging.getLogger(__name__)

# smearing width is fixed through epsilon * tau at the mean energy
EPSILON_TAU = 25.0
NORM_DRIFT_PER_STEP = 1e-12


@dataclass(frozen=True)
class OracleCase:
    name: str
    potential: Potential
    state: GaussianState
    M: float
    L: float
    grid: OracleGrid
    window: tuple[float, float]
    points: int = 200
    layer_width: float = 20.0

    @property
    def omega(self) -> float:
        return self.state.k0**2 / (2.0 * self.M)

    @property
    def tau(self) -> float:
        return EPSILON_TAU / self.omega

    @property
    def t_grid(self) -> np.ndarray:
        return np.linspace(*self.window, self.points)

    @property
    def n_steps(self) -> int:
        """Steps to cover the window plus the smearing tail."""
        end = self.window[1] + 5.0 * self.tau
        return int(math.ceil(end / self.grid.dt))

    def with_grid(self, grid: OracleGrid) -> "OracleCase":
        return OracleCase(
            name=self.name,
            potential=self.potential,
            state=self.state,
            M=self.M,
            L=self.L,
            grid=grid,
            window=self.window,
            points=self.points,
            layer_width=self.layer_width,
        )

    def describe(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "potential": self.potential.describe(),
            "state": self.state.describe(),
            "M": self.M,
            "L": self.L,
            "grid": {
                "x_min": self.grid.x_min,
                "dx": self.grid.dx,
                "dt": self.grid.dt,
            },
            "window": list(self.window),
            "points": self.points,
            "tau": self.tau,
        }


def _case(
    name: str, potential: Potential, dx: float = 0.0125, x_min: float = -150.0
) -> OracleCase:
    return OracleCase(
        name=name,
        potential=potential,
        state=GaussianState.from_sigma(x0=-40.0, k0=4.0, sigma=0.08),
        M=1.0,
        L=40.0,
        grid=OracleGrid(x_min=x_min, L=40.0, dx=dx, dt=0.005),
        window=(14.0, 26.0),
    )


CASES: dict[str, OracleCase] = {
    "free-gaussian": _case("free-gaussian", Free()),
    "square-barrier": _case("square-barrier", SquareBarrier(V0=12.0, d=0.5)),
    "delta-barrier": _case(
        "delta-barrier", DeltaBarrier(kappa=4.0), dx=0.002, x_min=-100.0
    ),
}


def get_case(name: str) -> OracleCase:
    try:
        return CASES[name]
    except KeyError:
        raise ValidationError(
            f"Unknown oracle case '{name}'; available: {', '.join(sorted(CASES))}"
        )


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    tolerance: Optional[float]
    passed: Optional[bool]

    def as_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "value": self.value,
            "tolerance": self.tolerance,
            "passed": self.passed,
        }


def upper_check(name: str, value: float, tolerance: float) -> Check:
    return Check(name, float(value), tolerance, bool(value <= tolerance))


def lower_check(name: str, value: float, tolerance: float) -> Check:
    return Check(name, float(value), tolerance, bool(value >= tolerance))


def report_only(name: str, value: float) -> Check:
    return Check(name, float(value), None, None)


@dataclass
class ComparisonReport:
    case: str
    checks: list[Check] = field(default_factory=list)
    flags: dict[str, Any] = field(default_factory=dict)
    parameters: dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(check.passed is not False for check in self.checks)

    def failed(self) -> list[str]:
        return [check.name for check in self.checks if check.passed is False]

    def to_dict(self) -> dict[str, Any]:
        return {
            "case": self.case,
            "passed": self.passed,
            "checks": [check.as_dict() for check in self.checks],
            "flags": self.flags,
            "parameters": self.parameters,
        }


@dataclass(frozen=True)
class CaseResult:
    exact: ArrivalDensity
    oracle: ArrivalDensity
    flux: FluxRecord
    corrected: Optional[ArrivalDensity]
    trajectory: Trajectory
    flags: dict[str, Any]

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(
            {
                "t": self.exact.t_grid,
                "p_exact": self.exact.p,
                "p_oracle": self.oracle.p,
                "flux": self.flux.on(self.exact.t_grid),
            }
        )
        if self.corrected is not None:
            frame["p_oracle_corrected"] = self.corrected.p
        return frame


def sup_relative(values: np.ndarray, reference: np.ndarray) -> float:
    """L-infinity distance relative to the reference peak."""
    return float(np.max(np.abs(values - reference)) / np.max(np.abs(reference)))


def l1_relative(values: np.ndarray, reference: np.ndarray, t_grid: np.ndarray) -> float:
    return float(
        simpson(np.abs(values - reference), x=t_grid)
        / simpson(np.abs(reference), x=t_grid)
    )


@log_computation()
def run_case(case: OracleCase, with_correction: bool = True) -> CaseResult:
    """Propagate one case and build every density the report compares."""
    t_grid = case.t_grid
    spec = spectral_state(case.state, case.potential, case.M, case.L)
    exact = p_exact(spec, t_grid)
    trajectory = propagate_restricted(
        case.state, case.potential, case.M, case.grid, case.n_steps
    )
    oracle = smeared_density_from_rho(
        trajectory, t_grid, case.M, case.tau, case.omega
    )
    corrected = None
    if with_correction and not isinstance(case.potential, Free):
        correction = reflection_correction(
            case.potential, case.M, case.L, 2.0 * case.state.momentum_window[1]
        )
        corrected = smeared_density_from_rho(
            trajectory, t_grid, case.M, case.tau, case.omega, correction
        )
    flux = flux_arrival_density(
        case.state,
        case.potential,
        case.M,
        case.L,
        case.grid,
        int(math.ceil(case.window[1] / case.grid.dt)),
        layer_width=case.layer_width,
    )
    return CaseResult(
        exact=exact,
        oracle=oracle,
        flux=flux,
        corrected=corrected,
        trajectory=trajectory,
        flags={**trajectory.flags, **flux.flags},
    )


def _restricted_checks(case: OracleCase, result: CaseResult) -> list[Check]:
    t_grid = case.t_grid
    exact = result.exact.p
    flux = result.flux.on(t_grid)
    negative = max(0.0, -float(result.flux.J.min())) / float(result.flux.J.max())
    checks = [
        upper_check("rho_vs_exact", sup_relative(result.oracle.p, exact), 0.03),
        upper_check("flux_vs_exact", l1_relative(flux, exact, t_grid), 0.05),
        upper_check("flux_negative_excursion", negative, 1e-4),
        upper_check(
            "norm_drift",
            result.trajectory.norm_drift,
            max(1e-8, NORM_DRIFT_PER_STEP * result.trajectory.times.size),
        ),
    ]
    if result.corrected is not None:
        checks.append(
            report_only(
                "propagator_substitution",
                sup_relative(result.corrected.p, result.oracle.p),
            )
        )
    return checks


def _matrix_checks(case: OracleCase, result: CaseResult) -> list[Check]:
    trajectory = result.trajectory
    rho = rho_small_scale(trajectory, case.t_grid, case.M, case.omega)
    blocks = block_integrals(trajectory, case.t_grid, case.M, case.omega)
    return [
        upper_check("hermiticity", hermiticity_residual(rho), 1e-10),
        lower_check("block_positivity", float(blocks.real.min()), -1e-8),
    ]


def _kijowski_checks(case: OracleCase, result: CaseResult) -> list[Check]:
    """Free-particle reference; p_exact differs from it at order (sigma/k0)**2."""
    kijowski = kijowski_reference(case.state, case.M, case.L, case.t_grid)
    spec = spectral_state(case.state, case.potential, case.M, case.L)
    monochromatic = p_monochromatic(spec, case.t_grid)
    spread = (case.state.sigma / case.state.k0) ** 2
    return [
        upper_check(
            "kijowski_vs_monochromatic",
            sup_relative(monochromatic.p, kijowski.p),
            1e-6,
        ),
        upper_check(
            "kijowski_vs_exact",
            sup_relative(result.exact.p, kijowski.p),
            max(1e-6, spread),
        ),
    ]


def _convergence_checks(
    case: OracleCase, coarse: CaseResult, fine: CaseResult
) -> list[Check]:
    t_grid = case.t_grid
    return [
        upper_check(
            "grid_convergence_rho",
            sup_relative(coarse.oracle.p, fine.oracle.p),
            0.03,
        ),
        upper_check(
            "grid_convergence_flux",
            l1_relative(coarse.flux.on(t_grid), fine.flux.on(t_grid), t_grid),
            0.05,
        ),
    ]


@log_computation()
def run_comparison(
    case: OracleCase, grid_check: bool = True
) -> tuple[ComparisonReport, CaseResult]:
    """Every oracle cross-check for one case, with the grid-convergence gate."""
    result = run_case(case)
    report = ComparisonReport(
        case=case.name, flags=dict(result.flags), parameters=case.describe()
    )
    report.checks.extend(_restricted_checks(case, result))
    report.checks.extend(_matrix_checks(case, result))
    if isinstance(case.potential, Free):
        report.checks.extend(_kijowski_checks(case, result))
    if grid_check:
        fine = run_case(case.with_grid(case.grid.refined()), with_correction=False)
        report.checks.extend(_convergence_checks(case, result, fine))
    if not report.passed:
        logger.warning(
            "Oracle case %s failed checks: %s", case.name, ", ".join(report.failed())
        )
    return report, result
