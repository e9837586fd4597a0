"""Command-line entry point: generate | train | simulate | tune | report."""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import dataset as ds
from . import hybrid, loadgen, report, surrogate as sg, tuning
from .config import ConfigError, RunConfig, load_config
from .solver import SOLVER, solve_newton_raphson


def _progress(message: str) -> None:
    print(message, file=sys.stderr)


def cmd_generate(config: RunConfig) -> None:
    """Generate loads and solve every timestep, writing the dataset CSV."""
    if config.load_spec is None:
        raise ConfigError("generate requires a load_spec section")
    network = config.load_network()
    series = loadgen.generate(config.load_spec, network)
    steps_per_day = 1440 // config.load_spec.resolution_minutes

    solutions = []
    guess = None
    for t in range(series.n_steps):
        sol = solve_newton_raphson(network, series.P[t], series.Q[t],
                                   guess if config.solver.warm_start else None,
                                   config.solver)
        if not sol.converged:
            raise loadgen.GenerationError(
                f"load at {series.timestamps[t]} (row {t}) does not converge")
        solutions.append(sol)
        guess = sol
        if (t + 1) % steps_per_day == 0:
            _progress(f"generate: day {(t + 1) // steps_per_day}"
                      f"/{config.load_spec.duration_days} solved")

    data = ds.Dataset(
        timestamps=series.timestamps,
        inputs=np.hstack([series.P, series.Q]),
        outputs_v=np.array([s.v for s in solutions]),
        outputs_a=np.array([s.a for s in solutions]),
    )
    out_path = config.resolve(config.dataset_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    ds.write_csv(data, out_path)
    _progress(f"generate: wrote {data.n_steps} rows to {out_path}")


def cmd_train(config: RunConfig) -> None:
    data = ds.read_csv(config.resolve(config.dataset_path))
    train_set, _ = ds.split(data, config.split)
    model = sg.train(train_set, method=config.surrogate.method,
                     n_c=config.surrogate.n_clusters, seed=config.surrogate.seed,
                     intercept=config.surrogate.intercept,
                     standardize=config.surrogate.standardize)
    model_path = config.resolve(config.surrogate.model_file)
    model_path.parent.mkdir(parents=True, exist_ok=True)
    sg.save(model, model_path)
    _progress(f"train: {model.method} n_c={model.n_c} model written to {model_path}")


def _test_series(config: RunConfig) -> tuple[ds.Dataset, loadgen.LoadSeries]:
    data = ds.read_csv(config.resolve(config.dataset_path))
    _, test_set = ds.split(data, config.split)
    n_p = test_set.n_loads
    series = loadgen.LoadSeries(timestamps=test_set.timestamps,
                                P=test_set.inputs[:, :n_p],
                                Q=test_set.inputs[:, n_p:])
    return test_set, series


def _write_solutions(solutions, timestamps, series, out_path) -> None:
    data = ds.Dataset(timestamps=timestamps,
                      inputs=np.hstack([series.P, series.Q]),
                      outputs_v=np.array([s.v for s in solutions]),
                      outputs_a=np.array([s.a for s in solutions]))
    ds.write_csv(data, out_path)


def cmd_simulate(config: RunConfig, pure_solver: bool = False) -> None:
    network = config.load_network()
    test_set, series = _test_series(config)
    out = config.out

    if pure_solver:
        solutions = hybrid.run_pure_solver(network, series, config.solver)
        records = [hybrid.StepRecord(timestamp=series.timestamps[t], decision=SOLVER,
                                     triggering_check="forced_first" if t == 0 else "error_stale",
                                     model_eps_inf_vs_truth=None,
                                     solver_iterations=s.iterations,
                                     wall_time=s.wall_time)
                   for t, s in enumerate(solutions)]
        _write_solutions(solutions, series.timestamps, series, out / "solutions.csv")
        hybrid.write_records(records, out / "records.csv")
        _progress(f"simulate: pure solver, {len(solutions)} steps -> {out}")
        return

    model = sg.load(config.resolve(config.surrogate.model_file))
    truth = (test_set.outputs_v, test_set.outputs_a)
    solutions, records, summary = hybrid.run_series(model, network, series,
                                                    config.hybrid, config.solver,
                                                    ground_truth=truth)
    _write_solutions(solutions, series.timestamps, series, out / "solutions.csv")
    hybrid.write_records(records, out / "records.csv")
    report.write_summary(summary, out / "summary.json")
    print(report.format_summary(summary))


def cmd_tune(config: RunConfig, parameter: str, values: list[float],
             values2: list[float] | None, calibration_days: tuple[int, int],
             jobs: int) -> None:
    network = config.load_network()
    _, series = _test_series(config)
    model = sg.load(config.resolve(config.surrogate.model_file))
    spec = tuning.SweepSpec(parameter=parameter, values=values, values2=values2,
                            calibration_days=calibration_days,
                            base_config=config.hybrid)
    results = tuning.sweep(spec, model, network, series, config.solver, jobs=jobs)
    out = config.out / f"sweep_{parameter}.csv"
    tuning.write_sweep(results, out)
    _progress(f"tune: {len(results)} grid points -> {out}")


def cmd_report(config: RunConfig, records_path, bin_width: float, clip: float) -> None:
    records = hybrid.read_records(records_path)
    summary = report.summarize(records, threshold=config.hybrid.error_check_threshold)
    out = config.out
    report.write_summary(summary, out / "summary.json")
    errors = report.step_errors(records)
    hist = report.histogram(errors, bin_width=bin_width, clip=clip)
    report.write_histogram(hist, out / "error_histogram.csv")
    report.write_error_series(records, None, out / "error_series.csv")
    print(report.format_summary(summary))


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x != ""]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hybridflow")
    parser.add_argument("--config", required=True, help="run configuration YAML")
    parser.add_argument("--seed", type=int, default=None,
                        help="override all seeds in the config")
    parser.add_argument("--out", default=None, help="override output directory")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("generate", help="generate loads and ground-truth dataset")
    sub.add_parser("train", help="train the clustered surrogate")

    p_sim = sub.add_parser("simulate", help="run the hybrid simulation")
    p_sim.add_argument("--pure-solver", action="store_true",
                       help="solve every step (produces ground truth)")

    p_tune = sub.add_parser("tune", help="sweep a gate threshold grid")
    p_tune.add_argument("--parameter", required=True, choices=tuning.PARAMETERS)
    p_tune.add_argument("--values", required=True, type=_float_list,
                        help="comma-separated grid values")
    p_tune.add_argument("--values2", type=_float_list, default=None,
                        help="comma-separated max_check_interval grid (2-D sweep)")
    p_tune.add_argument("--calibration-days", default="0,1",
                        help="day range within the test set, e.g. 0,1")
    p_tune.add_argument("--jobs", type=int, default=1)

    p_rep = sub.add_parser("report", help="summarize a records CSV")
    p_rep.add_argument("--records", required=True)
    p_rep.add_argument("--bin-width", type=float, default=0.0005)
    p_rep.add_argument("--clip", type=float, default=0.01)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config, seed_override=args.seed,
                             out_override=args.out)
        if args.command == "generate":
            cmd_generate(config)
        elif args.command == "train":
            cmd_train(config)
        elif args.command == "simulate":
            cmd_simulate(config, pure_solver=args.pure_solver)
        elif args.command == "tune":
            lo, hi = (int(x) for x in args.calibration_days.split(","))
            if not args.values:
                raise tuning.TuningError("empty sweep grid")
            cmd_tune(config, args.parameter, args.values, args.values2,
                     (lo, hi), args.jobs)
        elif args.command == "report":
            cmd_report(config, args.records, args.bin_width, args.clip)
    except (ConfigError, ds.DatasetError, tuning.TuningError, sg.SurrogateError,
            loadgen.LoadSpecError, loadgen.GenerationError,
            hybrid.SimulationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
