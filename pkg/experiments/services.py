"""Experiment pipelines: config in, artifacts and a manifest out.

``execute_pipeline`` is pure apart from the files it writes, so sweep
points can run in Celery workers. ``run_experiment`` and ``run_sweep``
wrap it with the ``ExperimentRun`` registry.
"""

import copy
import hashlib
import itertools
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional, Union

import numpy as np
import pandas as pd
import scipy
from celery import group
from django.conf import settings
from django.core.exceptions import ValidationError as DjangoValidationError
from rest_framework import serializers
from scipy.integrate import simpson

from tunneling.arrival import (
    GaussianLevel,
    detection_mass,
    extract_times,
    gaussian_time_scales,
    p_exact,
    p_full_smeared,
    p_monochromatic,
    p_gaussian_closed_form,
    spectral_norm,
    spectral_state,
    transmitted_fraction,
)
from tunneling.conf import get_thresholds, override_thresholds
from tunneling.core_model import (
    GaussianState,
    GaussianSuperposition,
    PhysParams,
    Potential,
    a_coefficient,
    forbidden_region,
    potential_from_dict,
)
from tunneling.dirichlet_povm import (
    lambda_full,
    lambda_parity,
    phase_time,
    uncertainty_bound,
)
from tunneling.exceptions import (
    MultiPeak,
    NonDifferentiablePotential,
    RegimeViolation,
    ResonantDenominator,
    TunnelingError,
)
from tunneling.scattering import solution_provider
from tunneling.sequential import (
    detected_fraction,
    ideal_distributions,
    pushforward_check,
    regime_check,
    sequential_density,
)
from tunneling.utils.logging import log_pipeline
from tunneling.validation import EPSILON_TAU, get_case, run_comparison

from .models import ExperimentRun
from .serializers import ExperimentConfigSerializer
from .writers import RunWriter, Units, dumps

logger = logging.getLogger(__name__)

InitialState = Union[GaussianState, GaussianSuperposition]

TIME_KEYS = {"t_d": "time", "t_tun": "time", "uncertainty": "time"}
TIMES_DIMENSIONS = {
    **TIME_KEYS,
    "k0": "wavenumber",
    "lambda": "length",
    "d_k": "length",
    "xi": "area",
    "lambda_full": "length",
    "lambda_parity": "length",
    "uncertainty_total": "time",
    "uncertainty_minimum": "time",
    "optimal_sigma": "wavenumber",
}
SUMMARY_DIMENSIONS = {
    **TIMES_DIMENSIONS,
    "t_peak": "time",
    "t_d_peak": "time",
    "t_tun_peak": "time",
}
PARAMETER_DIMENSIONS = {
    "L": "length",
    "M": "mass",
    "x0": "length",
    "delta": "length",
    "d": "length",
    "k0": "wavenumber",
    "sigma": "wavenumber",
    "kappa": "wavenumber",
    "V0": "rate",
    "tau": "time",
}


@dataclass
class PipelineContext:
    """Everything one pipeline invocation reads and records."""

    run_id: str
    config: dict[str, Any]
    writer: RunWriter
    violations: list[dict[str, Any]] = field(default_factory=list)
    flags: dict[str, Any] = field(default_factory=dict)

    @property
    def force(self) -> bool:
        return bool(self.config.get("force"))

    @property
    def M(self) -> float:
        return float(self.config["physics"]["M"])

    @property
    def L(self) -> Optional[float]:
        return self.config["physics"].get("L")

    @property
    def method(self) -> dict[str, Any]:
        return self.config["method"]

    def grid(self, name: str) -> np.ndarray:
        spec = self.config["grids"][name]
        return np.linspace(spec["start"], spec["stop"], spec["num"])

    def guarded(self, step: str, func: Callable[..., Any], *args: Any, **kwargs: Any):
        """Call ``func``; under ``force`` a regime violation is recorded instead."""
        try:
            return func(*args, **kwargs)
        except RegimeViolation as e:
            if not self.force:
                raise
            logger.warning(
                "Regime violation in %s (%s); continuing (forced)", step, e.condition
            )
            self.violations.append(
                {"step": step, "condition": e.condition, "message": e.messages[0]}
            )
            return None


@dataclass(frozen=True)
class PipelineResult:
    summary: dict[str, Any]
    manifest: dict[str, Any]
    directory: Path

    @property
    def passed(self) -> bool:
        return bool(self.summary.get("passed", True))


def build_potential(config: dict[str, Any]) -> Potential:
    return potential_from_dict(config["potential"])


def build_state(config: dict[str, Any]) -> InitialState:
    data = config["state"]
    if "components" in data:
        packets = [_packet(item) for item in data["components"]]
        components = data["components"]
        weights = [complex(*item.get("weight", (1.0, 0.0))) for item in components]
        return GaussianSuperposition.of(packets, weights)
    return _packet(data)


def _packet(data: dict[str, Any]) -> GaussianState:
    if "sigma" in data:
        return GaussianState.from_sigma(data["x0"], data["k0"], data["sigma"])
    return GaussianState.from_delta(data["x0"], data["k0"], data["delta"])


def _checked_geometry(
    ctx: PipelineContext, potential: Potential, state: InitialState
) -> None:
    params = PhysParams(M=ctx.M, L=float(ctx.L))
    ctx.flags["far_detector"] = params.validate_against(potential)
    ctx.flags["placement_ratio"] = state.check_placement(potential)


def _l1_distance(values: np.ndarray, reference: np.ndarray, t: np.ndarray) -> float:
    norm = simpson(np.abs(reference), x=t)
    if norm == 0:
        return float("nan")
    return float(simpson(np.abs(values - reference), x=t) / norm)


@log_pipeline()
def scatter(ctx: PipelineContext) -> dict[str, Any]:
    potential = build_potential(ctx.config)
    k_grid = ctx.grid("k")
    provider = solution_provider(potential, ctx.M)
    solutions = [provider(k) for k in k_grid]
    T = np.array([s.T_plus for s in solutions])
    frame = pd.DataFrame(
        {
            "k": k_grid,
            "transmission": np.abs(T) ** 2,
            "arg_T": np.angle(T),
            "reflection": [s.reflection for s in solutions],
            "wronskian_residual": [s.max_residual() for s in solutions],
            "method": [s.method for s in solutions],
        }
    )
    ctx.writer.write_csv("scatter.csv", frame, {"k": "wavenumber"})
    return {
        "max_wronskian_residual": float(frame["wronskian_residual"].max()),
        "min_transmission": float(frame["transmission"].min()),
        "max_transmission": float(frame["transmission"].max()),
    }


def _arrival_density(
    ctx: PipelineContext, state: InitialState, potential: Potential, t_grid: np.ndarray
):
    M, L = ctx.M, float(ctx.L)
    spec = spectral_state(state, potential, M, L, nodes=ctx.method.get("nodes"))
    ctx.flags["spectral_norm"] = spectral_norm(spec)
    ctx.flags["detection_mass"] = detection_mass(spec)
    ctx.flags["dropped_term_bound"] = spec.dropped_term_bound
    ctx.flags["energy_spread"] = spec.energy_spread
    name = ctx.method["arrival"]
    if name == "exact":
        return p_exact(spec, t_grid)
    if name == "smeared":
        tau = ctx.method.get("tau") or EPSILON_TAU * 2.0 * M / state.k0**2
        ctx.flags["tau"] = tau
        return ctx.guarded("p_full_smeared", p_full_smeared, spec, t_grid, tau)
    if name == "monochromatic":
        return p_monochromatic(spec, t_grid, force=ctx.force)
    weight, ts = gaussian_time_scales(state, potential, M, L)
    return p_gaussian_closed_form(
        state, weight, ts, GaussianLevel(name), M, L, t_grid, force=ctx.force
    )


@log_pipeline()
def arrival(ctx: PipelineContext) -> dict[str, Any]:
    potential = build_potential(ctx.config)
    state = build_state(ctx.config)
    _checked_geometry(ctx, potential, state)
    t_grid = ctx.grid("t")
    ctx.flags["transmitted_fraction"] = transmitted_fraction(state, potential, ctx.M)
    density = _arrival_density(ctx, state, potential, t_grid)
    if density is None:
        return {}
    ctx.writer.write_csv("arrival.csv", density.to_frame(), {"t": "time", "p": "rate"})
    ctx.flags["density"] = density.metadata()
    summary = {
        "t_peak": density.t_peak,
        "detected": density.detected,
        "p_nodetect": density.p_nodetect,
    }
    try:
        times = extract_times(density, state, potential, ctx.M, float(ctx.L))
    except MultiPeak as e:
        logger.warning("No single arrival peak: %s", e.messages[0])
        ctx.flags["multi_peak"] = e.details
        return summary
    derived = times.as_dict()
    ctx.flags["peak_times"] = derived
    summary.update({"t_d_peak": times.t_d, "t_tun_peak": times.t_tun})
    return summary


@log_pipeline()
def times(ctx: PipelineContext) -> dict[str, Any]:
    potential = build_potential(ctx.config)
    state = ctx.config["state"]
    if "components" in state:
        raise DjangoValidationError("The times pipeline needs a single packet")
    k0, sigma, M = state["k0"], state.get("sigma"), ctx.M
    if sigma is None and "delta" in state:
        sigma = 1.0 / (2.0 * state["delta"])
    provider = solution_provider(potential, M)
    d_k = forbidden_region(potential, k0, M)[2]
    try:
        a = a_coefficient(potential, k0, M)
    except NonDifferentiablePotential as e:
        logger.warning("No spreading coefficient: %s", e.messages[0])
        ctx.flags["a_coefficient"] = e.details
        a = None
    ts = phase_time(provider, k0, M, d_k, sigma=sigma, a_k0=a or 0.0)
    result: dict[str, Any] = {**ts.as_dict(), "a": a}
    if sigma is not None and a is not None:
        bound = uncertainty_bound(ts, a, sigma, M, k0)
        result.update(
            {
                "uncertainty_total": bound.total,
                "uncertainty_minimum": bound.minimum,
                "optimal_sigma": bound.optimal_sigma,
                "distinguishable": bound.distinguishable,
            }
        )
    if ctx.L is not None:
        try:
            result["lambda_full"] = lambda_full(provider, k0, ctx.L)
            if potential.is_parity_symmetric:
                result["lambda_parity"] = lambda_parity(provider, k0, ctx.L)
        except ResonantDenominator as e:
            logger.warning("Detector bracket vanishes: %s", e.messages[0])
            ctx.flags["resonant_denominator"] = e.details
    ctx.writer.write_json("times.json", result, TIMES_DIMENSIONS)
    return {
        key: value
        for key, value in result.items()
        if isinstance(value, (int, float)) and not isinstance(value, bool)
    }


@log_pipeline()
def sequential(ctx: PipelineContext) -> dict[str, Any]:
    potential = build_potential(ctx.config)
    state = build_state(ctx.config)
    _checked_geometry(ctx, potential, state)
    M, L = ctx.M, float(ctx.L)
    t_grid = ctx.grid("t")
    t_d_grid = ctx.grid("t_d") if "t_d" in ctx.config["grids"] else t_grid
    sigmas = ctx.method["sigma"]
    ideal_d, _ = ideal_distributions(state, potential, M, t_d_grid, sigma=sigmas[-1])
    _, ideal_t = ideal_distributions(state, potential, M, t_grid, sigma=sigmas[-1])
    frames, entries = [], []
    summary: dict[str, Any] = {
        "detected_fraction": detected_fraction(state, potential, M)
    }
    for sigma in sigmas:
        result = sequential_density(
            state, sigma, potential, M, L, t_d_grid, t_grid, force=ctx.force
        )
        cond_d, cond_t, details = regime_check(potential, sigma, state, M)
        entry = {
            **result.metadata(),
            "ideal_limit_delay": cond_d,
            "ideal_limit_tunneling": cond_t,
            "regime_details": details,
            "l1_delay": _l1_distance(result.P_d.density, ideal_d.density, t_d_grid),
            "l1_tunneling": _l1_distance(
                result.P_tun.density, ideal_t.density, t_grid
            ),
        }
        entries.append(entry)
        for marginal in (result.P_d, result.P_tun):
            frame = marginal.to_frame()
            frame.insert(0, "kind", marginal.kind)
            frame.insert(0, "sigma", sigma)
            frames.append(frame)
        summary.update(
            {
                "integral_d": entry["integral_d"],
                "integral_tun": entry["integral_tun"],
                "l1_delay": entry["l1_delay"],
                "l1_tunneling": entry["l1_tunneling"],
            }
        )
    dimensions = {"t_value": "time", "density": "rate"}
    ctx.writer.write_csv("sequential.csv", pd.concat(frames), dimensions)
    ideal_frames = []
    for ideal in (ideal_d, ideal_t):
        frame = ideal.to_frame()
        frame.insert(0, "kind", ideal.kind)
        frame["degenerate"] = ideal.degenerate
        ideal_frames.append(frame)
    ctx.writer.write_csv("ideal.csv", pd.concat(ideal_frames), dimensions)
    ctx.flags["sigmas"] = entries
    ctx.flags["ideal_integrals"] = {
        "delay": ideal_d.integral,
        "tunneling": ideal_t.integral,
    }
    samples = ctx.method["pushforward_samples"]
    if samples:
        ctx.flags["pushforward_ks"] = {
            ideal.kind: pushforward_check(state, potential, M, ideal, samples=samples)
            for ideal in (ideal_d, ideal_t)
        }
    return summary


@log_pipeline()
def oracle_compare(ctx: PipelineContext) -> dict[str, Any]:
    case = get_case(ctx.method["case"])
    report, result = run_comparison(case, grid_check=ctx.method["grid_check"])
    ctx.writer.write_json("report.json", report.to_dict())
    dimensions = {column: "rate" for column in result.to_frame().columns}
    dimensions["t"] = "time"
    ctx.writer.write_csv("oracle.csv", result.to_frame(), dimensions)
    ctx.flags["oracle"] = result.flags
    summary: dict[str, Any] = {"passed": report.passed}
    summary.update({check.name: check.value for check in report.checks})
    return summary


PIPELINES: dict[str, Callable[[PipelineContext], dict[str, Any]]] = {
    "scatter": scatter,
    "arrival": arrival,
    "times": times,
    "sequential": sequential,
    "oracle_compare": oracle_compare,
}


def config_digest(config: dict[str, Any]) -> str:
    stripped = {key: value for key, value in config.items() if key != "output"}
    return hashlib.sha256(dumps(stripped).encode("utf-8")).hexdigest()


def resolve_output_dir(config: dict[str, Any]) -> Path:
    """The configured directory, else one named after the config digest."""
    directory = config["output"].get("directory")
    if directory:
        return Path(directory)
    name = config["pipeline"] if "sweep" not in config else "sweep"
    root = Path(settings.EXPERIMENTS_OUTPUT_ROOT)
    return root / name / config_digest(config)[:12]


def _thresholds(config: dict[str, Any]) -> dict[str, Any]:
    with override_thresholds(**config["tolerances"]):
        return get_thresholds().as_dict()


def _versions() -> dict[str, str]:
    return {
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pandas": pd.__version__,
    }


def execute_pipeline(
    config: dict[str, Any], directory: Path, run_id: str = ""
) -> PipelineResult:
    """Run one validated config and write its artifacts under ``directory``."""
    writer = RunWriter(Path(directory), Units(**config["units"]))
    ctx = PipelineContext(run_id=run_id, config=config, writer=writer)
    with override_thresholds(**config["tolerances"]):
        summary = PIPELINES[config["pipeline"]](ctx)
        manifest = {
            "pipeline": config["pipeline"],
            "config": config,
            "thresholds": get_thresholds().as_dict(),
            "flags": ctx.flags,
            "violations": ctx.violations,
            "summary": summary,
            "versions": _versions(),
        }
    writer.write_manifest(manifest)
    return PipelineResult(
        summary=summary, manifest=manifest, directory=writer.directory
    )


def validate_config(data: Any) -> dict[str, Any]:
    """Schema-check a raw config mapping.

    Raises:
        serializers.ValidationError: unknown keys, bad values or a section
            the pipeline needs is missing.
    """
    serializer = ExperimentConfigSerializer(data=data)
    serializer.is_valid(raise_exception=True)
    return _plain(serializer.validated_data)


def _plain(value: Any) -> Any:
    """OrderedDicts and ReturnDicts from DRF as plain JSON-ready containers."""
    if isinstance(value, dict):
        return {key: _plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(item) for item in value]
    return value


def exit_code_for(error: Exception) -> int:
    if isinstance(error, TunnelingError):
        return 1
    if isinstance(error, (serializers.ValidationError, DjangoValidationError)):
        return 2
    return 1


def _recorded(
    pipeline: str, config: dict[str, Any], work: Callable[[ExperimentRun], Any]
) -> tuple[ExperimentRun, Any]:
    run = ExperimentRun.objects.create(
        pipeline=pipeline,
        config=config,
        output_dir=str(resolve_output_dir(config)),
    )
    run.start()
    try:
        result = work(run)
    except Exception as e:
        run.fail(str(e), exit_code=exit_code_for(e))
        raise
    run.complete(json.loads(dumps(result.manifest)))
    if not result.passed:
        run.exit_code = 1
        run.save(update_fields=["exit_code"])
    return run, result


def run_experiment(config: dict[str, Any]) -> tuple[ExperimentRun, PipelineResult]:
    """Execute a single-pipeline config and record it as an ExperimentRun."""
    return _recorded(
        config["pipeline"],
        config,
        lambda run: execute_pipeline(
            config, resolve_output_dir(config), run_id=run.run_id
        ),
    )


def _axis_values(axis: dict[str, Any]) -> list[float]:
    if "values" in axis:
        return list(axis["values"])
    spec = axis["range"]
    return np.linspace(spec["start"], spec["stop"], spec["num"]).tolist()


def _assign(config: dict[str, Any], path: str, value: float) -> None:
    section, key = path.split(".")
    target = config.setdefault(section, {})
    if section == "state" and "components" in target:
        raise serializers.ValidationError(
            {"sweep": [f"Cannot sweep {path} on a superposition."]}
        )
    target[key] = [value] if isinstance(target.get(key), list) else value


def sweep_points(config: dict[str, Any]) -> list[tuple[dict[str, float], dict]]:
    """Validated config of every grid point, in row-major axis order."""
    axes = config["sweep"]["axes"]
    base = {key: value for key, value in config.items() if key not in ("sweep",)}
    base["output"] = {}
    points = []
    for combo in itertools.product(*(_axis_values(axis) for axis in axes)):
        point = copy.deepcopy(base)
        coordinates = {}
        for axis, value in zip(axes, combo):
            _assign(point, axis["path"], value)
            coordinates[axis["path"]] = value
        points.append((coordinates, validate_config(point)))
    return points


@dataclass(frozen=True)
class SweepResult:
    summary: dict[str, Any]
    manifest: dict[str, Any]
    directory: Path
    frame: pd.DataFrame

    @property
    def passed(self) -> bool:
        return True


def execute_sweep(config: dict[str, Any], directory: Path) -> SweepResult:
    """Fan the grid points out as Celery tasks and aggregate in point order."""
    from .tasks import run_sweep_point

    points = sweep_points(config)
    directory = Path(directory)
    names = [f"point_{index:03d}" for index in range(len(points))]
    job = group(
        run_sweep_point.s(point, str(directory / name), name)
        for (_, point), name in zip(points, names)
    ).apply_async()
    summaries = job.get()
    rows = [
        {"point": name, **coordinates, **summary}
        for name, (coordinates, _), summary in zip(names, points, summaries)
    ]
    frame = pd.DataFrame(rows)
    writer = RunWriter(directory, Units(**config["units"]))
    dimensions = dict(SUMMARY_DIMENSIONS)
    for axis in config["sweep"]["axes"]:
        key = axis["path"].split(".")[1]
        if key in PARAMETER_DIMENSIONS:
            dimensions[axis["path"]] = PARAMETER_DIMENSIONS[key]
    writer.write_csv("aggregate.csv", frame, dimensions)
    manifest = {
        "pipeline": "sweep",
        "config": config,
        "thresholds": _thresholds(config),
        "points": [
            {"point": name, "coordinates": coordinates}
            for name, (coordinates, _) in zip(names, points)
        ],
        "versions": _versions(),
    }
    writer.write_manifest(manifest)
    return SweepResult(
        summary={"points": len(points)},
        manifest=manifest,
        directory=directory,
        frame=frame,
    )


def run_sweep(config: dict[str, Any]) -> tuple[ExperimentRun, SweepResult]:
    if "sweep" not in config:
        raise serializers.ValidationError({"sweep": ["This field is required."]})
    return _recorded(
        "sweep", config, lambda run: execute_sweep(config, resolve_output_dir(config))
    )


def summary_record(summary: dict[str, Any]) -> dict[str, Any]:
    """Sweep-point summary reduced to JSON scalars."""
    record: dict[str, Any] = {}
    for key, value in summary.items():
        if isinstance(value, (bool, np.bool_)):
            record[key] = bool(value)
        elif isinstance(value, (int, float, np.number)):
            record[key] = float(value)
    return record
