import numpy as np
import pytest

from hybridflow import surrogate as sg
from hybridflow.hybrid import HybridConfig, run_series
from hybridflow.report import step_errors
from hybridflow.tuning import (ERROR_GRID, ERROR_THRESHOLD, STEP_CHANGE,
                               SweepSpec, TuningError, config_for, recommend,
                               sweep, write_sweep)
from tests.conftest import series_from_dataset


@pytest.fixture(scope="module")
def trained(small_dataset):
    return sg.train(small_dataset, method=sg.KMEANS, n_c=3, seed=0)


@pytest.fixture(scope="module")
def test_slice(small_dataset):
    # last 4 days of the small fixture act as a test set
    per_day = small_dataset.steps_per_day
    return small_dataset.rows(6 * per_day, 10 * per_day)


def test_empty_grid_rejected():
    with pytest.raises(TuningError, match="non-empty"):
        SweepSpec(parameter=STEP_CHANGE, values=[])


def test_unknown_parameter_rejected():
    with pytest.raises(TuningError, match="unknown"):
        SweepSpec(parameter="bogus", values=[1.0])


def test_2d_sweep_needs_second_grid():
    with pytest.raises(TuningError, match="values2"):
        SweepSpec(parameter=ERROR_GRID, values=[0.01])


def test_single_point_equals_direct_run(trained, feeder30, test_slice, settings):
    spec = SweepSpec(parameter=STEP_CHANGE, values=[0.05])
    results = sweep(spec, trained, feeder30, series_from_dataset(test_slice), settings)
    assert len(results) == 1

    series = series_from_dataset(test_slice.rows(0, test_slice.steps_per_day))
    config = config_for(spec, 0.05)
    truth = (test_slice.outputs_v[:series.n_steps], test_slice.outputs_a[:series.n_steps])
    _, records, summary = run_series(trained, feeder30, series, config, settings,
                                     ground_truth=truth)
    point = results[0]
    assert point.model_fraction == pytest.approx(summary.avoided_solves_fraction)
    errors = step_errors(records)
    assert point.q50 == pytest.approx(float(np.percentile(errors, 50)))
    assert point.max_eps == pytest.approx(float(np.max(errors)))


def test_step_change_zero_grid_point(trained, feeder30, test_slice, settings):
    spec = SweepSpec(parameter=STEP_CHANGE, values=[0.0, 0.5])
    results = sweep(spec, trained, feeder30, series_from_dataset(test_slice), settings)
    zero = results[0]
    assert zero.model_fraction == 0.0
    assert zero.max_eps == 0.0


def test_quantiles_ordered(trained, feeder30, test_slice, settings):
    spec = SweepSpec(parameter=ERROR_THRESHOLD, values=[1e-6, 1e-4, 1e-2])
    results = sweep(spec, trained, feeder30, series_from_dataset(test_slice), settings)
    for r in results:
        assert r.q25 <= r.q50 <= r.q75 <= r.max_eps
        assert 0.0 <= r.model_fraction <= 1.0


def test_2d_grid_monotone(trained, feeder30, test_slice, settings):
    spec = SweepSpec(parameter=ERROR_GRID, values=[1e-7, 1e-4, 1e-1],
                     values2=[4, 8, 16])
    results = sweep(spec, trained, feeder30, series_from_dataset(test_slice), settings)
    frac = {(r.value, r.value2): r.model_fraction for r in results}
    for v2 in spec.values2:
        fractions = [frac[(v, v2)] for v in spec.values]
        assert fractions == sorted(fractions)
    for v in spec.values:
        fractions = [frac[(v, v2)] for v2 in spec.values2]
        assert fractions == sorted(fractions)


def test_sweep_deterministic(trained, feeder30, test_slice, settings):
    spec = SweepSpec(parameter=STEP_CHANGE, values=[0.01, 0.2])
    series = series_from_dataset(test_slice)
    r1 = sweep(spec, trained, feeder30, series, settings)
    r2 = sweep(spec, trained, feeder30, series, settings)
    assert [(a.q50, a.max_eps, a.model_fraction) for a in r1] \
        == [(b.q50, b.max_eps, b.model_fraction) for b in r2]


def test_sweep_parallel_matches_serial(trained, feeder30, test_slice, settings):
    spec = SweepSpec(parameter=STEP_CHANGE, values=[0.05, 0.2])
    series = series_from_dataset(test_slice)
    serial = sweep(spec, trained, feeder30, series, settings, jobs=1)
    parallel = sweep(spec, trained, feeder30, series, settings, jobs=2)
    assert [(a.value, a.q50, a.model_fraction) for a in serial] \
        == [(b.value, b.q50, b.model_fraction) for b in parallel]


def test_recommend_picks_highest_model_use(trained, feeder30, test_slice, settings):
    spec = SweepSpec(parameter=ERROR_THRESHOLD, values=[1e-7, 1e-4, 1e-2])
    results = sweep(spec, trained, feeder30, series_from_dataset(test_slice), settings)
    best = recommend(results, max_error_budget=1.0)
    assert best is not None
    assert best.model_fraction == max(r.model_fraction for r in results)
    assert best.max_eps <= 1.0


def test_recommend_infeasible_budget(trained, feeder30, test_slice, settings):
    spec = SweepSpec(parameter=ERROR_THRESHOLD, values=[1e-2])
    results = sweep(spec, trained, feeder30, series_from_dataset(test_slice), settings)
    assert recommend(results, max_error_budget=0.0) is None


def test_recommend_never_violates_budget(trained, feeder30, test_slice, settings):
    spec = SweepSpec(parameter=STEP_CHANGE, values=[0.0, 0.01, 0.2])
    results = sweep(spec, trained, feeder30, series_from_dataset(test_slice), settings)
    budget = np.median([r.max_eps for r in results])
    best = recommend(results, budget)
    if best is not None:
        assert best.max_eps <= budget


def test_calibration_slice_out_of_range(trained, feeder30, test_slice, settings):
    spec = SweepSpec(parameter=STEP_CHANGE, values=[0.1], calibration_days=(0, 99))
    with pytest.raises(TuningError, match="outside"):
        sweep(spec, trained, feeder30, series_from_dataset(test_slice), settings)


def test_write_sweep_csv(tmp_path, trained, feeder30, test_slice, settings):
    spec = SweepSpec(parameter=STEP_CHANGE, values=[0.05, 0.2])
    results = sweep(spec, trained, feeder30, series_from_dataset(test_slice), settings)
    path = tmp_path / "sweep.csv"
    write_sweep(results, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0].startswith("parameter,value,value2,q25,q50,q75")
    assert len(lines) == 3
