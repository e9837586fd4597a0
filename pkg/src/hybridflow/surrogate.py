"""Clustered linear-regression surrogate for the power flow mapping.

Each cluster of similar (p, q) inputs gets its own pair of least-squares
maps: one from inputs to voltage magnitudes, one to angles. New inputs
are routed to the nearest cluster center and evaluated with that
cluster's model. Inputs are optionally z-scored (train-set statistics)
before both clustering distances and regression.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset

KMEANS = "kmeans"
DAY_OF_WEEK = "day_of_week"
NONE = "none"

FORMAT_VERSION = 1


class SurrogateError(ValueError):
    """Raised for invalid training data or configurations."""


@dataclass
class RegressionModel:
    A1: np.ndarray                 # [n_v, 2*n_p] inputs -> v
    A2: np.ndarray                 # [n_v, 2*n_p] inputs -> a
    b1: np.ndarray | None = None   # intercepts, length n_v
    b2: np.ndarray | None = None


@dataclass
class ClusterAssignment:
    cluster_index: int
    distance: float
    distance_percentile: float     # nearest-rank against train_distances


@dataclass
class ClusteredSurrogate:
    method: str                    # "kmeans", "day_of_week", or "none"
    n_c: int
    centers: np.ndarray            # [n_c, 2*n_p], in standardized space if scaled
    models: list[RegressionModel]
    train_distances: list[np.ndarray]  # per cluster, sorted ascending
    input_mean: np.ndarray | None = None
    input_scale: np.ndarray | None = None

    @property
    def n_inputs(self) -> int:
        return self.centers.shape[1]

    def _standardize(self, x: np.ndarray) -> np.ndarray:
        if self.input_mean is None:
            return x
        return (x - self.input_mean) / self.input_scale


def fit_regression(train_inputs: np.ndarray, train_outputs: np.ndarray,
                   intercept: bool = True) -> tuple[np.ndarray, np.ndarray | None]:
    """Ordinary least squares A (and optional intercept b) minimizing
    sum ||y - A x - b||^2, via SVD; rank-deficient systems yield the
    minimum-norm coefficient matrix.
    """
    X = np.asarray(train_inputs, dtype=float)
    Y = np.asarray(train_outputs, dtype=float)
    if X.ndim != 2 or Y.ndim != 2 or X.shape[0] != Y.shape[0]:
        raise SurrogateError(f"incompatible training shapes {X.shape} and {Y.shape}")
    if not (np.isfinite(X).all() and np.isfinite(Y).all()):
        raise SurrogateError("non-finite values in training data")
    if intercept:
        x_mean = X.mean(axis=0)
        y_mean = Y.mean(axis=0)
        At, *_ = np.linalg.lstsq(X - x_mean, Y - y_mean, rcond=None)
        A = At.T
        return A, y_mean - A @ x_mean
    At, *_ = np.linalg.lstsq(X, Y, rcond=None)
    return At.T, None


@dataclass
class KMeansResult:
    centers: np.ndarray
    assignments: np.ndarray
    wcss: float
    wcss_history: list[float]      # per Lloyd iteration of the winning restart


def _nearest(points: np.ndarray, centers: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    labels = np.argmin(d2, axis=1)  # argmin ties -> lowest index
    return labels, d2[np.arange(len(points)), labels]


def _kmeans_pp_init(points: np.ndarray, n_c: int, rng: np.random.Generator) -> np.ndarray:
    centers = np.empty((n_c, points.shape[1]))
    centers[0] = points[rng.integers(len(points))]
    d2 = ((points - centers[0]) ** 2).sum(axis=1)
    for k in range(1, n_c):
        total = d2.sum()
        if total <= 0.0:
            centers[k] = points[rng.integers(len(points))]
        else:
            idx = rng.choice(len(points), p=d2 / total)
            centers[k] = points[idx]
        d2 = np.minimum(d2, ((points - centers[k]) ** 2).sum(axis=1))
    return centers


def _lloyd(points: np.ndarray, centers: np.ndarray, max_iter: int,
           tol: float) -> tuple[np.ndarray, np.ndarray, float, list[float]]:
    history = []
    labels, d2 = _nearest(points, centers)
    for _ in range(max_iter):
        history.append(float(d2.sum()))
        new_centers = centers.copy()
        for k in range(len(centers)):
            members = labels == k
            if members.any():
                new_centers[k] = points[members].mean(axis=0)
            else:
                # re-seed empty cluster at the point farthest from its center
                new_centers[k] = points[np.argmax(d2)]
        movement = np.max(np.abs(new_centers - centers))
        centers = new_centers
        labels, d2 = _nearest(points, centers)
        if movement < tol:
            break
    history.append(float(d2.sum()))
    return centers, labels, float(d2.sum()), history


def kmeans(points: np.ndarray, n_c: int, seed: int = 0, n_restarts: int = 10,
           max_iter: int = 300, tol: float = 1e-8,
           full_output: bool = False):
    """k-means++ seeded Lloyd clustering, best of n_restarts by WCSS."""
    points = np.asarray(points, dtype=float)
    if points.ndim != 2:
        raise SurrogateError("points must be a 2-D array")
    if n_c < 1:
        raise SurrogateError("n_c must be >= 1")
    if len(np.unique(points, axis=0)) < n_c:
        raise SurrogateError(f"n_c={n_c} exceeds the number of distinct points")

    rng = np.random.default_rng(seed)
    best: KMeansResult | None = None
    for _ in range(n_restarts):
        init = _kmeans_pp_init(points, n_c, rng)
        centers, labels, wcss, history = _lloyd(points, init, max_iter, tol)
        if best is None or wcss < best.wcss:
            best = KMeansResult(centers, labels, wcss, history)
    if full_output:
        return best
    return best.centers, best.assignments


def cluster_day_of_week(timestamps: np.ndarray) -> np.ndarray:
    """Weekday index per timestamp, Monday = 0."""
    days = timestamps.astype("datetime64[D]").astype(np.int64)
    return ((days + 3) % 7).astype(int)  # epoch 1970-01-01 is a Thursday


def train(dataset: Dataset, method: str = KMEANS, n_c: int = 7, seed: int = 0,
          intercept: bool = True, standardize: bool = True,
          min_cluster_size: int = 10, n_restarts: int = 10,
          max_iter: int = 300, tol: float = 1e-8) -> ClusteredSurrogate:
    """Fit a clustered surrogate on a training dataset."""
    if dataset.n_steps == 0:
        raise SurrogateError("empty training dataset")
    X = dataset.inputs
    if standardize:
        mean = X.mean(axis=0)
        scale = X.std(axis=0)
        scale = np.where(scale > 1e-12, scale, 1.0)
        Xs = (X - mean) / scale
    else:
        mean = scale = None
        Xs = X

    if method == NONE:
        labels = np.zeros(dataset.n_steps, dtype=int)
        centers = Xs.mean(axis=0)[None, :]
        n_c = 1
    elif method == DAY_OF_WEEK:
        labels = cluster_day_of_week(dataset.timestamps)
        present = np.unique(labels)
        n_c = 7
        centers = np.zeros((7, Xs.shape[1]))
        for k in present:
            centers[k] = Xs[labels == k].mean(axis=0)
    elif method == KMEANS:
        centers, labels = kmeans(Xs, n_c, seed=seed, n_restarts=n_restarts,
                                 max_iter=max_iter, tol=tol)
    else:
        raise SurrogateError(f"unknown clustering method {method!r}")

    models = []
    train_distances = []
    for k in range(n_c):
        members = labels == k
        count = int(members.sum())
        if method != DAY_OF_WEEK and count == 0:
            raise SurrogateError(f"cluster {k} is empty")
        if 0 < count < min_cluster_size:
            raise SurrogateError(f"cluster {k} has only {count} samples "
                                 f"(minimum {min_cluster_size}); try smaller n_c")
        if count == 0:
            models.append(RegressionModel(A1=np.zeros((dataset.n_voltages, Xs.shape[1])),
                                          A2=np.zeros((dataset.n_voltages, Xs.shape[1]))))
            train_distances.append(np.array([]))
            continue
        A1, b1 = fit_regression(Xs[members], dataset.outputs_v[members], intercept)
        A2, b2 = fit_regression(Xs[members], dataset.outputs_a[members], intercept)
        models.append(RegressionModel(A1=A1, A2=A2, b1=b1, b2=b2))
        dists = np.linalg.norm(Xs[members] - centers[k], axis=1)
        train_distances.append(np.sort(dists))

    return ClusteredSurrogate(method=method, n_c=n_c, centers=centers, models=models,
                              train_distances=train_distances,
                              input_mean=mean, input_scale=scale)


def _assign_standardized(surrogate: ClusteredSurrogate,
                         xs: np.ndarray) -> ClusterAssignment:
    diff = surrogate.centers - xs
    d2 = np.einsum("ij,ij->i", diff, diff)
    k = int(np.argmin(d2))
    d = float(np.sqrt(d2[k]))
    dists = surrogate.train_distances[k]
    if len(dists) == 0:
        percentile = 100.0
    else:
        # nearest rank: fraction of training members strictly closer
        percentile = 100.0 * np.searchsorted(dists, d, side="left") / len(dists)
    return ClusterAssignment(cluster_index=k, distance=d,
                             distance_percentile=float(percentile))


def assign(surrogate: ClusteredSurrogate, x: np.ndarray) -> ClusterAssignment:
    """Route an input to its nearest cluster center (ties to lowest index)."""
    xs = surrogate._standardize(np.asarray(x, dtype=float))
    return _assign_standardized(surrogate, xs)


def _predict_standardized(surrogate: ClusteredSurrogate, xs: np.ndarray,
                          cluster_index: int) -> tuple[np.ndarray, np.ndarray]:
    model = surrogate.models[cluster_index]
    v = model.A1 @ xs
    a = model.A2 @ xs
    if model.b1 is not None:
        v = v + model.b1
    if model.b2 is not None:
        a = a + model.b2
    return v, a


def predict(surrogate: ClusteredSurrogate, x: np.ndarray,
            assignment: ClusterAssignment | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate the assigned cluster's model: v = A1 x (+ b1), a = A2 x (+ b2)."""
    if assignment is None:
        assignment = assign(surrogate, x)
    xs = surrogate._standardize(np.asarray(x, dtype=float))
    return _predict_standardized(surrogate, xs, assignment.cluster_index)


def evaluate(surrogate: ClusteredSurrogate, x: np.ndarray
             ) -> tuple[ClusterAssignment, np.ndarray, np.ndarray]:
    """assign + predict with the input standardized once."""
    xs = surrogate._standardize(np.asarray(x, dtype=float))
    assignment = _assign_standardized(surrogate, xs)
    v, a = _predict_standardized(surrogate, xs, assignment.cluster_index)
    return assignment, v, a


def _array(arr: np.ndarray | None):
    return None if arr is None else arr.tolist()


def save(surrogate: ClusteredSurrogate, path) -> None:
    """Serialize to a versioned, self-describing JSON file."""
    doc = {
        "format": "hybridflow-surrogate",
        "version": FORMAT_VERSION,
        "method": surrogate.method,
        "n_c": surrogate.n_c,
        "n_inputs": surrogate.n_inputs,
        "centers": surrogate.centers.tolist(),
        "input_mean": _array(surrogate.input_mean),
        "input_scale": _array(surrogate.input_scale),
        "train_distances": [d.tolist() for d in surrogate.train_distances],
        "models": [
            {"A1": m.A1.tolist(), "A2": m.A2.tolist(),
             "b1": _array(m.b1), "b2": _array(m.b2)}
            for m in surrogate.models
        ],
    }
    with open(path, "w") as f:
        json.dump(doc, f, sort_keys=True)


def load(path) -> ClusteredSurrogate:
    with open(path) as f:
        doc = json.load(f)
    if doc.get("format") != "hybridflow-surrogate":
        raise SurrogateError(f"{path}: not a surrogate model file")
    if doc.get("version") != FORMAT_VERSION:
        raise SurrogateError(f"{path}: unsupported version {doc.get('version')}")

    def arr(x):
        return None if x is None else np.array(x, dtype=float)

    return ClusteredSurrogate(
        method=doc["method"],
        n_c=int(doc["n_c"]),
        centers=np.array(doc["centers"], dtype=float),
        models=[RegressionModel(A1=np.array(m["A1"]), A2=np.array(m["A2"]),
                                b1=arr(m["b1"]), b2=arr(m["b2"]))
                for m in doc["models"]],
        train_distances=[np.array(d, dtype=float) for d in doc["train_distances"]],
        input_mean=arr(doc["input_mean"]),
        input_scale=arr(doc["input_scale"]),
    )
