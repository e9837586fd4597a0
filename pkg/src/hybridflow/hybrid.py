"""Solver/model switching engine for quasi-steady-state time series.

At each timestep the surrogate prediction is screened by up to three
gates (distance percentile, step change, error check with a staleness
cap). If any gate fires, the physics solver runs instead, the model's
error against the solver is stored for future gating, and the solver is
warm-started from the last accepted solution.
"""

from __future__ import annotations

import csv
import gc
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import surrogate as sg
from .loadgen import LoadSeries
from .metrics import eps_inf
from .netmodel import Network
from .solver import MODEL, SOLVER, SolverSettings, VoltageSolution, solve_newton_raphson

# triggering_check values
FORCED_FIRST = "forced_first"
DISTANCE = "distance"
STEP_CHANGE = "step_change"
ERROR_STALE = "error_stale"
ERROR_HIGH = "error_high"


class SimulationError(RuntimeError):
    """Solver failure during a hybrid run; never papered over by the model."""


@dataclass
class HybridConfig:
    error_check_threshold: float = 0.01
    max_check_interval: int = 12            # steps; 60 min at 5-min resolution
    distance_percentile_threshold: float | None = 95.0
    step_change_threshold: float = 0.20
    error_check_enabled: bool = True
    distance_check_enabled: bool = False    # off by default: adds cost, rarely fires
    step_change_enabled: bool = True

    def __post_init__(self):
        if self.max_check_interval < 1:
            raise ValueError("max_check_interval must be >= 1")
        if self.error_check_enabled and self.error_check_threshold < 0:
            raise ValueError("error_check_threshold must be >= 0")
        if self.distance_check_enabled and self.distance_percentile_threshold is None:
            raise ValueError("distance check enabled but no percentile threshold set")


@dataclass
class HybridState:
    last_accepted: VoltageSolution | None = None
    last_observed_model_error: float = math.inf
    steps_since_check: int = 0


@dataclass
class StepRecord:
    timestamp: np.datetime64
    decision: str                        # "model" or "solver"
    triggering_check: str | None
    model_eps_inf_vs_truth: float | None = None
    solver_iterations: int | None = None
    wall_time: float = 0.0


def init_state() -> HybridState:
    return HybridState()


def step(state: HybridState, surrogate: sg.ClusteredSurrogate, network: Network,
         p_t: np.ndarray, q_t: np.ndarray, config: HybridConfig,
         settings: SolverSettings,
         timestamp: np.datetime64 | None = None
         ) -> tuple[VoltageSolution, StepRecord, HybridState]:
    """One timestep: gate evaluation, then model acceptance or a solve.

    Gate order (attribution only; the model/solver decision is the same
    under any order): distance, step change, staleness, stored error.
    """
    start = time.perf_counter()
    x = np.concatenate([p_t, q_t])
    assignment, pred_v, pred_a = sg.evaluate(surrogate, x)

    trigger = None
    if state.last_accepted is None:
        trigger = FORCED_FIRST
    else:
        last = state.last_accepted
        if (trigger is None and config.distance_check_enabled
                and assignment.distance_percentile >= config.distance_percentile_threshold):
            trigger = DISTANCE
        if (trigger is None and config.step_change_enabled
                and eps_inf(pred_v, pred_a, last.v, last.a) >= config.step_change_threshold):
            trigger = STEP_CHANGE
        if (trigger is None and config.error_check_enabled
                and state.steps_since_check + 1 >= config.max_check_interval):
            trigger = ERROR_STALE
        if (trigger is None and config.error_check_enabled
                and state.last_observed_model_error >= config.error_check_threshold):
            trigger = ERROR_HIGH

    if trigger is not None:
        guess = state.last_accepted if settings.warm_start else None
        solution = solve_newton_raphson(network, p_t, q_t, guess, settings)
        if not solution.converged:
            raise SimulationError(f"solver did not converge at {timestamp} "
                                  f"(max {settings.max_iterations} iterations)")
        model_error = eps_inf(pred_v, pred_a, solution.v, solution.a)
        new_state = HybridState(last_accepted=solution,
                                last_observed_model_error=model_error,
                                steps_since_check=0)
        record = StepRecord(timestamp=timestamp, decision=SOLVER,
                            triggering_check=trigger,
                            solver_iterations=solution.iterations,
                            wall_time=time.perf_counter() - start)
        return solution, record, new_state

    solution = VoltageSolution(v=pred_v, a=pred_a, iterations=0, provenance=MODEL,
                               converged=True)
    new_state = HybridState(last_accepted=solution,
                            last_observed_model_error=state.last_observed_model_error,
                            steps_since_check=state.steps_since_check + 1)
    record = StepRecord(timestamp=timestamp, decision=MODEL, triggering_check=None,
                        wall_time=time.perf_counter() - start)
    return solution, record, new_state


def run_series(surrogate: sg.ClusteredSurrogate, network: Network,
               load_series: LoadSeries, config: HybridConfig,
               settings: SolverSettings,
               ground_truth: tuple[np.ndarray, np.ndarray] | None = None
               ) -> tuple[list[VoltageSolution], list[StepRecord], "RunSummary"]:
    """Sequential hybrid simulation over a load series.

    ground_truth, when given, is (v, a) matrices aligned with the series;
    each record then carries the accepted output's error against truth.
    """
    from .report import summarize  # local import to avoid a cycle

    state = init_state()
    solutions = []
    records = []
    # the loop allocates no reference cycles; pausing the cyclic
    # collector keeps its pauses out of the per-step wall times
    gc_was_enabled = gc.isenabled()
    gc.disable()
    try:
        for t in range(load_series.n_steps):
            solution, record, state = step(state, surrogate, network,
                                           load_series.P[t], load_series.Q[t],
                                           config, settings,
                                           timestamp=load_series.timestamps[t])
            if ground_truth is not None:
                record.model_eps_inf_vs_truth = eps_inf(solution.v, solution.a,
                                                        ground_truth[0][t],
                                                        ground_truth[1][t])
            solutions.append(solution)
            records.append(record)
    finally:
        if gc_was_enabled:
            gc.enable()
    summary = summarize(records, threshold=config.error_check_threshold)
    return solutions, records, summary


def run_pure_solver(network: Network, load_series: LoadSeries,
                    settings: SolverSettings) -> list[VoltageSolution]:
    """Ground-truth replay: solve every timestep, warm-starting from the
    previous solution (flat start on the first)."""
    solutions = []
    guess = None
    for t in range(load_series.n_steps):
        sol = solve_newton_raphson(network, load_series.P[t], load_series.Q[t],
                                   guess if settings.warm_start else None, settings)
        if not sol.converged:
            raise SimulationError(f"solver did not converge at "
                                  f"{load_series.timestamps[t]}")
        solutions.append(sol)
        guess = sol
    return solutions


RECORD_HEADER = ["timestamp", "decision", "triggering_check", "eps_inf",
                 "solver_iterations"]


def write_records(records: list[StepRecord], path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(RECORD_HEADER)
        for r in records:
            writer.writerow([
                np.datetime_as_string(r.timestamp, unit="s") + "Z",
                r.decision,
                r.triggering_check or "",
                "" if r.model_eps_inf_vs_truth is None
                else f"{r.model_eps_inf_vs_truth:.17g}",
                "" if r.solver_iterations is None else r.solver_iterations,
            ])


def read_records(path) -> list[StepRecord]:
    records = []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        if header != RECORD_HEADER:
            raise ValueError(f"{path}: unexpected records header {header}")
        for row in reader:
            records.append(StepRecord(
                timestamp=np.datetime64(row[0].rstrip("Z"), "s"),
                decision=row[1],
                triggering_check=row[2] or None,
                model_eps_inf_vs_truth=float(row[3]) if row[3] else None,
                solver_iterations=int(row[4]) if row[4] else None,
            ))
    return records
