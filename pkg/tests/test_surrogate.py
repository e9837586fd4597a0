import numpy as np
import pytest

from hybridflow import surrogate as sg
from hybridflow.dataset import Dataset
from hybridflow.surrogate import (ClusteredSurrogate, SurrogateError, assign,
                                  cluster_day_of_week, fit_regression, kmeans,
                                  predict, train)


def linear_dataset(T=200, n_p=2, n_v=3, seed=0, noise=0.0):
    """Outputs exactly (or nearly) linear in the stacked (p, q) inputs."""
    rng = np.random.default_rng(seed)
    X = rng.uniform(0.5, 1.5, (T, 2 * n_p))
    A_v = rng.standard_normal((n_v, 2 * n_p)) * 0.05
    A_a = rng.standard_normal((n_v, 2 * n_p)) * 0.05
    V = 1.0 + X @ A_v.T + noise * rng.standard_normal((T, n_v))
    A = X @ A_a.T + noise * rng.standard_normal((T, n_v))
    ts = (np.datetime64("2024-01-01T00:00:00", "s")
          + np.arange(T) * np.timedelta64(300, "s"))
    return Dataset(timestamps=ts, inputs=X, outputs_v=V, outputs_a=A), A_v, A_a


# --- fit_regression ---------------------------------------------------------

def test_exact_linear_map_recovered():
    data, A_v, _ = linear_dataset()
    A, b = fit_regression(data.inputs, data.outputs_v, intercept=True)
    pred = data.inputs @ A.T + b
    assert np.max(np.abs(pred - data.outputs_v)) < 1e-9 * np.abs(data.outputs_v).max()
    assert np.allclose(A, A_v, atol=1e-9)


def test_repeated_input_predicts_mean_output():
    X = np.tile([[1.0, 2.0]], (10, 1))
    Y = np.arange(10.0).reshape(-1, 1)
    A, b = fit_regression(X, Y, intercept=True)
    assert (X[0] @ A.T + b)[0] == pytest.approx(Y.mean(), abs=1e-10)


def test_matches_normal_equations_oracle():
    rng = np.random.default_rng(5)
    X = rng.standard_normal((50, 6))
    Y = rng.standard_normal((50, 4))
    A, b = fit_regression(X, Y, intercept=False)
    assert b is None
    oracle = (np.linalg.pinv(X) @ Y).T  # brute-force pseudo-inverse
    assert np.allclose(A, oracle, rtol=1e-8, atol=1e-12)


def test_rank_deficient_gives_minimum_norm():
    rng = np.random.default_rng(6)
    base = rng.standard_normal((30, 3))
    X = np.hstack([base, base[:, :2]])  # duplicated columns: rank 3 of 5
    Y = rng.standard_normal((30, 2))
    A, _ = fit_regression(X, Y, intercept=False)
    oracle = (np.linalg.pinv(X) @ Y).T
    assert np.allclose(A, oracle, rtol=1e-8, atol=1e-10)


def test_nonfinite_training_rejected():
    X = np.array([[1.0], [np.inf]])
    with pytest.raises(SurrogateError, match="non-finite"):
        fit_regression(X, X, intercept=False)


def test_least_squares_optimality_under_perturbation():
    rng = np.random.default_rng(7)
    X = rng.standard_normal((40, 3))
    Y = X @ rng.standard_normal((3, 2)) + 0.1 * rng.standard_normal((40, 2))
    A, b = fit_regression(X, Y, intercept=True)
    base_rss = np.sum((Y - X @ A.T - b) ** 2)
    for i in range(A.shape[0]):
        for j in range(A.shape[1]):
            for delta in (1e-4, -1e-4):
                A2 = A.copy()
                A2[i, j] += delta
                rss = np.sum((Y - X @ A2.T - b) ** 2)
                assert rss >= base_rss - 1e-12


# --- kmeans -----------------------------------------------------------------

def test_single_cluster_center_is_mean():
    rng = np.random.default_rng(8)
    pts = rng.standard_normal((50, 3))
    centers, labels = kmeans(pts, 1, seed=0)
    assert np.allclose(centers[0], pts.mean(axis=0), atol=1e-12)
    assert np.all(labels == 0)


def test_two_blob_recovery():
    rng = np.random.default_rng(9)
    blob_a = rng.standard_normal((100, 2)) * 0.1
    blob_b = rng.standard_normal((100, 2)) * 0.1 + 10.0
    pts = np.vstack([blob_a, blob_b])
    _, labels = kmeans(pts, 2, seed=0)
    assert len(set(labels[:100])) == 1
    assert len(set(labels[100:])) == 1
    assert labels[0] != labels[100]


def test_wcss_monotone_and_fixed_point():
    rng = np.random.default_rng(10)
    pts = rng.standard_normal((200, 4))
    result = kmeans(pts, 5, seed=3, full_output=True)
    history = result.wcss_history
    assert all(history[i + 1] <= history[i] + 1e-9 for i in range(len(history) - 1))
    # fixed point: reassign then recompute centers changes nothing
    d2 = ((pts[:, None, :] - result.centers[None, :, :]) ** 2).sum(axis=2)
    labels = d2.argmin(axis=1)
    assert np.array_equal(labels, result.assignments)
    for k in range(5):
        assert np.allclose(result.centers[k], pts[labels == k].mean(axis=0), atol=1e-7)


def test_kmeans_deterministic_under_seed():
    rng = np.random.default_rng(11)
    pts = rng.standard_normal((120, 3))
    c1, l1 = kmeans(pts, 4, seed=42)
    c2, l2 = kmeans(pts, 4, seed=42)
    assert np.array_equal(c1, c2)
    assert np.array_equal(l1, l2)


def test_kmeans_too_many_clusters():
    pts = np.zeros((10, 2))
    with pytest.raises(SurrogateError, match="distinct"):
        kmeans(pts, 2, seed=0)


# --- day-of-week clustering -------------------------------------------------

def test_monday_is_cluster_zero():
    ts = np.array([np.datetime64("2024-01-01T12:00:00", "s")])  # a Monday
    assert cluster_day_of_week(ts)[0] == 0


def test_seven_day_set_fills_all_clusters():
    ts = (np.datetime64("2024-01-01T00:00:00", "s")
          + np.arange(7 * 24) * np.timedelta64(3600, "s"))
    labels = cluster_day_of_week(ts)
    assert set(labels) == set(range(7))


def test_28_day_set_splits_evenly():
    ts = (np.datetime64("2024-01-01T00:00:00", "s")
          + np.arange(28 * 24) * np.timedelta64(3600, "s"))
    counts = np.bincount(cluster_day_of_week(ts), minlength=7)
    assert np.all(counts == 28 * 24 // 7)


# --- train / assign / predict ----------------------------------------------

def test_method_none_equals_one_cluster():
    data, _, _ = linear_dataset(noise=0.001)
    s_none = train(data, method=sg.NONE, seed=0)
    s_one = train(data, method=sg.KMEANS, n_c=1, seed=0)
    assert s_none.n_c == 1
    assert np.allclose(s_none.centers, s_one.centers, atol=1e-12)
    x = data.inputs[17]
    assert np.allclose(predict(s_none, x)[0], predict(s_one, x)[0], atol=1e-12)


def test_piecewise_linear_regimes_need_clustering():
    rng = np.random.default_rng(12)
    T = 600
    regimes = np.repeat(np.arange(3), T // 3)
    offsets = np.array([0.0, 5.0, 10.0])
    X = rng.uniform(0, 0.5, (T, 4)) + offsets[regimes][:, None]
    slopes = np.array([[1.0, -1.0, 0.5, 0.2], [-2.0, 0.3, 1.5, -0.7],
                       [0.1, 2.0, -1.2, 0.9]])
    Y = np.einsum("tj,tj->t", X, slopes[regimes])[:, None] + offsets[regimes][:, None]
    ts = (np.datetime64("2024-01-01T00:00:00", "s")
          + np.arange(T) * np.timedelta64(300, "s"))
    data = Dataset(ts, X, Y, np.zeros_like(Y))

    s3 = train(data, method=sg.KMEANS, n_c=3, seed=0)
    s1 = train(data, method=sg.KMEANS, n_c=1, seed=0)
    err3 = max(abs(predict(s3, X[t])[0][0] - Y[t, 0]) for t in range(0, T, 7))
    err1 = max(abs(predict(s1, X[t])[0][0] - Y[t, 0]) for t in range(0, T, 7))
    assert err3 <= 1e-6
    assert err1 > 100 * err3


def test_small_cluster_rejected():
    data, _, _ = linear_dataset(T=30)
    with pytest.raises(SurrogateError, match="smaller n_c"):
        train(data, method=sg.KMEANS, n_c=10, seed=0, min_cluster_size=10)


def test_assign_center_exactly():
    data, _, _ = linear_dataset(noise=0.001)
    model = train(data, method=sg.KMEANS, n_c=3, seed=0)
    # un-standardize the center to get the raw-space input that maps onto it
    raw = model.centers[1] * model.input_scale + model.input_mean
    result = assign(model, raw)
    assert result.cluster_index == 1
    assert result.distance == pytest.approx(0.0, abs=1e-12)
    assert result.distance_percentile == 0.0


def test_assign_far_point_percentile_100():
    data, _, _ = linear_dataset(noise=0.001)
    model = train(data, method=sg.KMEANS, n_c=2, seed=0)
    far = data.inputs[0] + 1e6
    assert assign(model, far).distance_percentile == 100.0


def test_assign_matches_linear_scan():
    data, _, _ = linear_dataset(noise=0.001, T=300)
    model = train(data, method=sg.KMEANS, n_c=4, seed=1)
    rng = np.random.default_rng(13)
    for _ in range(20):
        x = rng.uniform(0.5, 1.5, data.inputs.shape[1])
        xs = (x - model.input_mean) / model.input_scale
        scan = min(range(model.n_c),
                   key=lambda k: (np.linalg.norm(xs - model.centers[k]), k))
        assert assign(model, x).cluster_index == scan


def test_predict_reproduces_noiseless_training_sample():
    data, _, _ = linear_dataset(noise=0.0)
    model = train(data, method=sg.KMEANS, n_c=2, seed=0)
    v, a = predict(model, data.inputs[50])
    assert np.max(np.abs(v - data.outputs_v[50])) < 1e-9
    assert np.max(np.abs(a - data.outputs_a[50])) < 1e-9


def test_zero_input_no_intercept_gives_zero():
    data, _, _ = linear_dataset()
    model = train(data, method=sg.NONE, seed=0, intercept=False, standardize=False)
    v, a = predict(model, np.zeros(data.inputs.shape[1]))
    assert np.allclose(v, 0.0, atol=1e-12)
    assert np.allclose(a, 0.0, atol=1e-12)


def test_predict_equals_manual_evaluation():
    data, _, _ = linear_dataset(noise=0.01)
    model = train(data, method=sg.KMEANS, n_c=2, seed=0)
    x = data.inputs[123]
    result = assign(model, x)
    m = model.models[result.cluster_index]
    xs = (x - model.input_mean) / model.input_scale
    v, a = predict(model, x)
    assert np.array_equal(v, m.A1 @ xs + m.b1)
    assert np.array_equal(a, m.A2 @ xs + m.b2)


def test_clustering_improves_mode_structured_fit(small_dataset, small_spec):
    from hybridflow.loadgen import mode_labels
    from hybridflow.metrics import eps_inf

    n_modes = len(small_spec.modes)
    s_multi = train(small_dataset, method=sg.KMEANS, n_c=n_modes, seed=0)
    s_single = train(small_dataset, method=sg.KMEANS, n_c=1, seed=0)
    wins = 0
    T = small_dataset.n_steps
    for t in range(T):
        x = small_dataset.inputs[t]
        truth_v, truth_a = small_dataset.outputs_v[t], small_dataset.outputs_a[t]
        e_multi = eps_inf(*predict(s_multi, x), truth_v, truth_a)
        e_single = eps_inf(*predict(s_single, x), truth_v, truth_a)
        wins += e_multi <= e_single
    assert wins / T >= 0.90


def test_serialization_round_trip(tmp_path):
    data, _, _ = linear_dataset(noise=0.01)
    model = train(data, method=sg.KMEANS, n_c=3, seed=2)
    path = tmp_path / "model.json"
    sg.save(model, path)
    loaded = sg.load(path)
    assert loaded.method == model.method
    assert loaded.n_c == model.n_c
    assert np.array_equal(loaded.centers, model.centers)
    for m1, m2 in zip(loaded.models, model.models):
        assert np.array_equal(m1.A1, m2.A1)
        assert np.array_equal(m1.b2, m2.b2)
    x = data.inputs[3]
    assert np.array_equal(predict(loaded, x)[0], predict(model, x)[0])


def test_serialized_determinism(tmp_path):
    data, _, _ = linear_dataset(noise=0.01)
    p1, p2 = tmp_path / "m1.json", tmp_path / "m2.json"
    sg.save(train(data, method=sg.KMEANS, n_c=3, seed=5), p1)
    sg.save(train(data, method=sg.KMEANS, n_c=3, seed=5), p2)
    assert p1.read_bytes() == p2.read_bytes()
