"""Run summaries and plot-ready error distribution files.

No plots are rendered here; histogram bins and per-step error series are
emitted as CSVs for external plotting tools.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass

import numpy as np

from .hybrid import StepRecord
from .solver import MODEL, SOLVER


class ReportError(ValueError):
    """Raised for inconsistent report inputs."""


@dataclass
class RunSummary:
    n_steps: int
    avoided_solves_fraction: float
    median_eps_inf: float
    max_eps_inf: float
    fraction_above_threshold: float
    threshold: float
    wall_time_solver: float
    wall_time_model: float
    mean_solver_iterations: float
    mean_step_time_solver: float
    mean_step_time_model: float


def step_errors(records: list[StepRecord]) -> np.ndarray:
    """Accepted-output error per test step; solver steps contribute 0."""
    errors = np.zeros(len(records))
    for i, r in enumerate(records):
        if r.decision == MODEL and r.model_eps_inf_vs_truth is not None:
            errors[i] = r.model_eps_inf_vs_truth
    return errors


def summarize(records: list[StepRecord], threshold: float = 0.01) -> RunSummary:
    """Aggregate a record stream into the standard comparison metrics."""
    if not records:
        raise ReportError("no records to summarize")
    n = len(records)
    model_steps = [r for r in records if r.decision == MODEL]
    solver_steps = [r for r in records if r.decision == SOLVER]
    errors = step_errors(records)
    iterations = [r.solver_iterations for r in solver_steps
                  if r.solver_iterations is not None]
    solver_time = sum(r.wall_time for r in solver_steps)
    model_time = sum(r.wall_time for r in model_steps)
    return RunSummary(
        n_steps=n,
        avoided_solves_fraction=len(model_steps) / n,
        median_eps_inf=float(np.median(errors)),
        max_eps_inf=float(np.max(errors)),
        fraction_above_threshold=float(np.mean(errors > threshold)),
        threshold=threshold,
        wall_time_solver=solver_time,
        wall_time_model=model_time,
        mean_solver_iterations=(float(np.mean(iterations)) if iterations else 0.0),
        mean_step_time_solver=(solver_time / len(solver_steps) if solver_steps else 0.0),
        mean_step_time_model=(model_time / len(model_steps) if model_steps else 0.0),
    )


@dataclass
class Histogram:
    edges: np.ndarray        # bin edges on [0, clip)
    counts: np.ndarray
    clipped_fraction: float
    clipped_count: int
    max_value: float
    total: int


def histogram(errors: np.ndarray, bin_width: float, clip: float) -> Histogram:
    """Fixed-width bins on [0, clip); values >= clip are counted as clipped."""
    errors = np.asarray(errors, dtype=float)
    if bin_width <= 0:
        raise ReportError("bin_width must be > 0")
    if clip <= 0:
        raise ReportError("clip must be > 0")
    if (errors < 0).any():
        raise ReportError("errors must be non-negative")
    n_bins = int(np.ceil(clip / bin_width))
    edges = np.arange(n_bins + 1) * bin_width
    in_range = errors[errors < clip]
    counts, _ = np.histogram(in_range, bins=edges)
    clipped = int(np.sum(errors >= clip))
    total = len(errors)
    return Histogram(edges=edges, counts=counts,
                     clipped_fraction=(clipped / total if total else 0.0),
                     clipped_count=clipped,
                     max_value=(float(np.max(errors)) if total else 0.0),
                     total=total)


def write_summary(summary: RunSummary, path) -> None:
    with open(path, "w") as f:
        json.dump(asdict(summary), f, indent=2, sort_keys=True)
        f.write("\n")


def format_summary(summary: RunSummary) -> str:
    lines = [
        f"steps:                    {summary.n_steps}",
        f"avoided solves:           {summary.avoided_solves_fraction:.1%}",
        f"median eps_inf:           {summary.median_eps_inf:.3e}",
        f"max eps_inf:              {summary.max_eps_inf:.3e}",
        f"above {summary.threshold:g} threshold:   {summary.fraction_above_threshold:.2%}",
        f"solver wall time:         {summary.wall_time_solver:.3f} s",
        f"model wall time:          {summary.wall_time_model:.3f} s",
        f"mean solver iterations:   {summary.mean_solver_iterations:.2f}",
    ]
    return "\n".join(lines)


def write_histogram(hist: Histogram, path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["bin_lo", "bin_hi", "count"])
        for lo, hi, c in zip(hist.edges[:-1], hist.edges[1:], hist.counts):
            writer.writerow([f"{lo:.17g}", f"{hi:.17g}", int(c)])
        writer.writerow(["clipped", "", hist.clipped_count])
    meta = {"clipped_fraction": hist.clipped_fraction, "max_value": hist.max_value,
            "total": hist.total}
    with open(str(path) + ".meta.json", "w") as f:
        json.dump(meta, f, indent=2, sort_keys=True)
        f.write("\n")


def write_error_series(records: list[StepRecord], cluster_labels, path) -> None:
    """Per-step error time series with cluster labels, for error-vs-time plots."""
    if cluster_labels is not None and len(cluster_labels) != len(records):
        raise ReportError("cluster_labels length does not match records")
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["timestamp", "decision", "eps_inf", "cluster"])
        for i, r in enumerate(records):
            writer.writerow([
                np.datetime_as_string(r.timestamp, unit="s") + "Z",
                r.decision,
                "" if r.model_eps_inf_vs_truth is None
                else f"{r.model_eps_inf_vs_truth:.17g}",
                "" if cluster_labels is None else int(cluster_labels[i]),
            ])
