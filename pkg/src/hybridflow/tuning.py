"""Gate-threshold calibration sweeps over a held-out calibration slice.

One hybrid run per grid point; ground truth for the slice comes from a
single pure-solver replay shared across all points. Results are emitted
as a CSV table of error quantiles and model-use fractions.
"""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .hybrid import HybridConfig, run_pure_solver, run_series
from .loadgen import LoadSeries
from .netmodel import Network
from .report import step_errors
from .solver import SolverSettings
from .surrogate import ClusteredSurrogate

DISTANCE_PERCENTILE = "distance_percentile"
STEP_CHANGE = "step_change"
ERROR_THRESHOLD = "error_threshold"
ERROR_GRID = "error_threshold_x_max_interval"

PARAMETERS = (DISTANCE_PERCENTILE, STEP_CHANGE, ERROR_THRESHOLD, ERROR_GRID)


class TuningError(ValueError):
    """Raised for invalid sweep specifications."""


@dataclass
class SweepSpec:
    parameter: str
    values: list[float]
    values2: list[float] | None = None          # max_check_interval grid for ERROR_GRID
    calibration_days: tuple[int, int] = (0, 1)  # day range within the test set
    base_config: HybridConfig = field(default_factory=HybridConfig)

    def __post_init__(self):
        if self.parameter not in PARAMETERS:
            raise TuningError(f"unknown sweep parameter {self.parameter!r}")
        if not self.values:
            raise TuningError("sweep values must be non-empty")
        if self.parameter == ERROR_GRID and not self.values2:
            raise TuningError("2-D sweep needs values2 (max_check_interval grid)")


@dataclass
class SweepPoint:
    parameter: str
    value: float
    value2: float | None
    q25: float
    q50: float
    q75: float
    max_eps: float
    model_fraction: float
    extreme: bool


def config_for(spec: SweepSpec, value: float, value2: float | None = None) -> HybridConfig:
    base = spec.base_config
    if spec.parameter == DISTANCE_PERCENTILE:
        return replace(base, distance_check_enabled=True,
                       distance_percentile_threshold=value)
    if spec.parameter == STEP_CHANGE:
        return replace(base, step_change_enabled=True, step_change_threshold=value)
    if spec.parameter == ERROR_THRESHOLD:
        return replace(base, error_check_enabled=True, error_check_threshold=value)
    if spec.parameter == ERROR_GRID:
        return replace(base, error_check_enabled=True, error_check_threshold=value,
                       max_check_interval=int(value2))
    raise TuningError(f"unknown sweep parameter {spec.parameter!r}")


def _evaluate(args):
    (spec, value, value2, surrogate, network, series, truth, settings) = args
    config = config_for(spec, value, value2)
    _, records, _ = run_series(surrogate, network, series, config, settings,
                               ground_truth=truth)
    errors = step_errors(records)
    q25, q50, q75 = np.percentile(errors, [25, 50, 75])
    model_fraction = np.mean([r.decision == "model" for r in records])
    max_eps = float(np.max(errors))
    extreme = max_eps > 10.0 * spec.base_config.error_check_threshold
    return SweepPoint(parameter=spec.parameter, value=value, value2=value2,
                      q25=float(q25), q50=float(q50), q75=float(q75),
                      max_eps=max_eps, model_fraction=float(model_fraction),
                      extreme=extreme)


def sweep(spec: SweepSpec, surrogate: ClusteredSurrogate, network: Network,
          test_series: LoadSeries, settings: SolverSettings | None = None,
          jobs: int = 1) -> list[SweepPoint]:
    """Run the grid on the calibration slice of the test series."""
    settings = settings or SolverSettings()
    steps_per_day = 1440 * 60 // int(
        (test_series.timestamps[1] - test_series.timestamps[0])
        / np.timedelta64(1, "s"))
    lo = spec.calibration_days[0] * steps_per_day
    hi = spec.calibration_days[1] * steps_per_day
    if hi > test_series.n_steps or lo >= hi:
        raise TuningError(f"calibration slice {spec.calibration_days} outside the "
                          f"test span of {test_series.n_steps // steps_per_day} days")
    series = LoadSeries(timestamps=test_series.timestamps[lo:hi],
                        P=test_series.P[lo:hi], Q=test_series.Q[lo:hi])
    # one pure-solver replay amortized across all grid points
    truth_solutions = run_pure_solver(network, series, settings)
    truth = (np.array([s.v for s in truth_solutions]),
             np.array([s.a for s in truth_solutions]))

    grid = [(v, v2) for v in spec.values
            for v2 in (spec.values2 if spec.parameter == ERROR_GRID else [None])]
    tasks = [(spec, v, v2, surrogate, network, series, truth, settings)
             for v, v2 in grid]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_evaluate, tasks))
    return [_evaluate(t) for t in tasks]


def recommend(results: list[SweepPoint],
              max_error_budget: float) -> SweepPoint | None:
    """Highest model-use fraction among settings within the error budget;
    ties broken toward the smaller threshold. None if nothing qualifies."""
    if not results:
        raise TuningError("empty sweep results")
    feasible = [r for r in results if r.max_eps <= max_error_budget]
    if not feasible:
        return None
    return max(feasible, key=lambda r: (r.model_fraction,
                                        -(r.value + (r.value2 or 0.0))))


def write_sweep(results: list[SweepPoint], path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["parameter", "value", "value2", "q25", "q50", "q75",
                        "max", "model_fraction", "extreme_flag"])
        for r in results:
            writer.writerow([
                r.parameter, f"{r.value:.17g}",
                "" if r.value2 is None else f"{r.value2:.17g}",
                f"{r.q25:.17g}", f"{r.q50:.17g}", f"{r.q75:.17g}",
                f"{r.max_eps:.17g}", f"{r.model_fraction:.17g}",
                int(r.extreme),
            ])
