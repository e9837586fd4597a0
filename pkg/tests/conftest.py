import numpy as np
import pytest

from hybridflow import dataset as ds
from hybridflow import hybrid, loadgen
from hybridflow.config import load_bundled_or_path
from hybridflow.solver import SolverSettings


@pytest.fixture(scope="session")
def net4():
    return load_bundled_or_path("net4")


@pytest.fixture(scope="session")
def feeder30():
    return load_bundled_or_path("feeder30")


@pytest.fixture(scope="session")
def settings():
    return SolverSettings()


@pytest.fixture(scope="session")
def small_spec(feeder30):
    # 10 days at 15-min resolution keeps fixture construction quick
    return loadgen.LoadProfileSpec(n_loads=feeder30.n_loads, resolution_minutes=15,
                                   duration_days=10, seed=99)


@pytest.fixture(scope="session")
def small_series(small_spec, feeder30):
    return loadgen.generate(small_spec, feeder30)


@pytest.fixture(scope="session")
def small_dataset(small_series, feeder30, settings):
    solutions = hybrid.run_pure_solver(feeder30, small_series, settings)
    return ds.Dataset(
        timestamps=small_series.timestamps,
        inputs=np.hstack([small_series.P, small_series.Q]),
        outputs_v=np.array([s.v for s in solutions]),
        outputs_a=np.array([s.a for s in solutions]),
    )


def make_dataset(series, network, settings=None):
    settings = settings or SolverSettings()
    solutions = hybrid.run_pure_solver(network, series, settings)
    return ds.Dataset(
        timestamps=series.timestamps,
        inputs=np.hstack([series.P, series.Q]),
        outputs_v=np.array([s.v for s in solutions]),
        outputs_a=np.array([s.a for s in solutions]),
    )


def series_from_dataset(data):
    n_p = data.n_loads
    return loadgen.LoadSeries(timestamps=data.timestamps,
                              P=data.inputs[:, :n_p], Q=data.inputs[:, n_p:])
