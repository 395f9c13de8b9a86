"""Small numpy regressors with real hyperparameters, plus k-fold scoring.

Three model kinds are available:

* ``ridge``: ``alpha`` (continuous), ``max_iter`` (discrete, gradient solver
  only), ``solver`` in ``{direct, gradient}``.
* ``knn_regressor``: ``n_neighbors`` (discrete).
* ``boosted_stumps``: ``learning_rate`` (continuous), ``max_iter`` (discrete),
  ``loss`` in ``{squared_error, absolute_error}``.

Datasets are synthetic Friedman-style regression surfaces (or loaded from CSV).
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Tuple, Union

import numpy as np

from .errors import DomainError

log = logging.getLogger(__name__)

MODEL_KINDS = ("ridge", "knn_regressor", "boosted_stumps")
METRICS = ("r2", "mse", "accuracy")

DEFAULT_HYPERPARAMETERS: Dict[str, Dict[str, Any]] = {
    "ridge": {"alpha": 1.0, "max_iter": 1000, "solver": "direct"},
    "knn_regressor": {"n_neighbors": 5},
    "boosted_stumps": {"learning_rate": 0.1, "max_iter": 50, "loss": "squared_error"},
}


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    params: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        self.y = np.asarray(self.y, dtype=float).ravel()
        if len(self.X) != len(self.y):
            raise DomainError("X and y must have the same number of rows")
        if not (np.all(np.isfinite(self.X)) and np.all(np.isfinite(self.y))):
            raise DomainError("dataset contains non-finite entries")

    def __len__(self) -> int:
        return len(self.y)

    def subset(self, idx) -> "Dataset":
        return Dataset(self.X[idx], self.y[idx], dict(self.params))

    def to_csv(self, path: Union[str, Path]) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"x{j}" for j in range(self.X.shape[1])] + ["y"])
            for row, target in zip(self.X, self.y):
                w.writerow([repr(float(v)) for v in row] + [repr(float(target))])

    @classmethod
    def from_csv(cls, path: Union[str, Path], target: str = "y") -> "Dataset":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = [list(map(float, r)) for r in reader if r]
        if target not in header:
            raise DomainError(f"{path}: no target column {target!r}")
        arr = np.array(rows, dtype=float).reshape(len(rows), len(header))
        t = header.index(target)
        return cls(np.delete(arr, t, axis=1), arr[:, t], {"path": str(path)})


def friedman_dataset(n_samples: int = 500, n_features: int = 5, noise: float = 1.0,
                     seed: int = 0) -> Dataset:
    """``10 sin(pi x0 x1) + 20 (x2 - 0.5)^2 + 10 x3 + 5 x4 + noise``, inputs ~ U[0, 1]."""
    if n_features < 5:
        raise ValueError("the Friedman surface needs at least 5 features")
    rng = np.random.default_rng(seed)
    X = rng.uniform(size=(n_samples, n_features))
    y = (10 * np.sin(np.pi * X[:, 0] * X[:, 1]) + 20 * (X[:, 2] - 0.5) ** 2
         + 10 * X[:, 3] + 5 * X[:, 4] + noise * rng.standard_normal(n_samples))
    params = {"generator": "friedman", "n_samples": n_samples, "n_features": n_features,
              "noise": noise, "seed": seed}
    return Dataset(X, y, params)


# --- metrics ----------------------------------------------------------------

def r2_score(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    ss_res = float(np.sum((y_true - y_pred) ** 2))
    ss_tot = float(np.sum((y_true - np.mean(y_true)) ** 2))
    if ss_tot == 0.0:
        # constant target: perfect predictions score 1, anything else 0
        return 1.0 if ss_res <= 1e-12 * max(1.0, float(np.sum(y_true**2))) else 0.0
    return 1.0 - ss_res / ss_tot


def score(metric: str, y_true: np.ndarray, y_pred: np.ndarray) -> float:
    if metric == "r2":
        return r2_score(y_true, y_pred)
    if metric == "mse":
        return float(np.mean((y_true - y_pred) ** 2))
    if metric == "accuracy":
        # for integer-labelled targets: rounded prediction must match the label
        return float(np.mean(np.round(y_pred) == np.round(y_true)))
    raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")


# --- models -----------------------------------------------------------------

@dataclass(frozen=True)
class ToyModelSpec:
    kind: str
    hyperparameters: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}; expected one of {MODEL_KINDS}")
        unknown = set(self.hyperparameters) - set(DEFAULT_HYPERPARAMETERS[self.kind])
        if unknown:
            raise ValueError(f"{self.kind} has no hyperparameters {sorted(unknown)}")

    def resolved(self) -> Dict[str, Any]:
        return {**DEFAULT_HYPERPARAMETERS[self.kind], **self.hyperparameters}


class _Standardizer:
    def __init__(self, X: np.ndarray):
        self.mean = X.mean(axis=0)
        std = X.std(axis=0)
        self.std = np.where(std > 0, std, 1.0)

    def __call__(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean) / self.std


class Ridge:
    """L2-penalized least squares on standardized features; intercept unpenalized."""

    def __init__(self, alpha: float = 1.0, max_iter: int = 1000, solver: str = "direct"):
        if alpha < 0:
            raise DomainError("alpha must be non-negative")
        if solver not in ("direct", "gradient"):
            raise ValueError(f"unknown solver {solver!r}")
        self.alpha = float(alpha)
        self.max_iter = int(max_iter)
        self.solver = solver
        self.flags: List[str] = []

    def fit(self, X: np.ndarray, y: np.ndarray) -> "Ridge":
        self._scale = _Standardizer(X)
        Z = self._scale(X)
        self.intercept_ = float(y.mean())
        yc = y - self.intercept_
        if self.solver == "direct":
            try:
                gram = Z.T @ Z + self.alpha * np.eye(Z.shape[1])
                self.coef_ = np.linalg.solve(gram, Z.T @ yc)
                if not np.all(np.isfinite(self.coef_)):
                    raise np.linalg.LinAlgError("non-finite solution")
                return self
            except np.linalg.LinAlgError:
                log.warning("ridge direct solve failed; falling back to gradient solver")
                self.flags.append("singular_fallback")
        self.coef_ = self._gradient_solve(Z, yc)
        return self

    def _gradient_solve(self, Z: np.ndarray, yc: np.ndarray) -> np.ndarray:
        # objective 0.5 |Zw - y|^2 + 0.5 alpha |w|^2, step 1 / Lipschitz constant
        lip = float(np.linalg.norm(Z, 2) ** 2) + self.alpha
        step = 1.0 / lip if lip > 0 else 1.0
        w = np.zeros(Z.shape[1])
        for _ in range(self.max_iter):
            w -= step * (Z.T @ (Z @ w - yc) + self.alpha * w)
        return w

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self._scale(X) @ self.coef_ + self.intercept_


class KNNRegressor:
    """Mean target of the ``n_neighbors`` nearest training rows (Euclidean)."""

    def __init__(self, n_neighbors: int = 5):
        if int(n_neighbors) < 1:
            raise DomainError("n_neighbors must be >= 1")
        self.n_neighbors = int(n_neighbors)
        self.flags: List[str] = []

    def fit(self, X: np.ndarray, y: np.ndarray) -> "KNNRegressor":
        self._scale = _Standardizer(X)
        self._X = self._scale(X)
        self._y = y.copy()
        if self.n_neighbors > len(y):
            self.flags.append("n_neighbors_clipped")
        return self

    def predict(self, X: np.ndarray) -> np.ndarray:
        Z = self._scale(X)
        d2 = (np.sum(Z**2, axis=1)[:, None] - 2 * Z @ self._X.T
              + np.sum(self._X**2, axis=1)[None, :])
        k = min(self.n_neighbors, len(self._y))
        nearest = np.argsort(d2, axis=1, kind="stable")[:, :k]
        return self._y[nearest].mean(axis=1)


class BoostedStumps:
    """Gradient boosting with depth-1 regression trees.

    ``squared_error`` fits leaf means of the residuals; ``absolute_error`` fits
    stumps to the residual signs and sets each leaf to the median residual.
    """

    def __init__(self, learning_rate: float = 0.1, max_iter: int = 50,
                 loss: str = "squared_error"):
        if not learning_rate > 0:
            raise DomainError("learning_rate must be positive")
        if int(max_iter) < 0:
            raise DomainError("max_iter must be non-negative")
        if loss not in ("squared_error", "absolute_error"):
            raise ValueError(f"unknown loss {loss!r}")
        self.learning_rate = float(learning_rate)
        self.max_iter = int(max_iter)
        self.loss = loss
        self.flags: List[str] = []

    def fit(self, X: np.ndarray, y: np.ndarray) -> "BoostedStumps":
        n, n_feat = X.shape
        order = np.argsort(X, axis=0, kind="stable")
        xs = np.take_along_axis(X, order, axis=0)
        # split after sorted position i is valid only between distinct values
        valid = xs[1:] > xs[:-1]  # (n-1, F)
        self.init_ = float(np.median(y) if self.loss == "absolute_error" else np.mean(y))
        F = np.full(n, self.init_)
        self.stumps_: List[Tuple[int, float, float, float]] = []
        counts = np.arange(1, n)[:, None].astype(float)
        for _ in range(self.max_iter):
            resid = y - F
            target = np.sign(resid) if self.loss == "absolute_error" else resid
            rs = target[order]  # (n, F)
            left = np.cumsum(rs, axis=0)[:-1]
            total = rs.sum(axis=0)
            right = total - left
            gain = left**2 / counts + right**2 / (n - counts)
            gain = np.where(valid, gain, -np.inf)
            if not np.any(np.isfinite(gain)):
                break
            flat = int(np.argmax(gain))
            i, j = divmod(flat, n_feat)
            thr = 0.5 * (xs[i, j] + xs[i + 1, j])
            mask = X[:, j] <= thr
            if self.loss == "absolute_error":
                lv, rv = float(np.median(resid[mask])), float(np.median(resid[~mask]))
            else:
                lv, rv = float(resid[mask].mean()), float(resid[~mask].mean())
            self.stumps_.append((j, thr, lv, rv))
            F += self.learning_rate * np.where(mask, lv, rv)
        return self

    def predict(self, X: np.ndarray) -> np.ndarray:
        out = np.full(len(X), self.init_)
        for j, thr, lv, rv in self.stumps_:
            out += self.learning_rate * np.where(X[:, j] <= thr, lv, rv)
        return out


def make_model(spec: ToyModelSpec):
    hp = spec.resolved()
    if spec.kind == "ridge":
        return Ridge(alpha=float(hp["alpha"]), max_iter=int(hp["max_iter"]),
                     solver=hp["solver"])
    if spec.kind == "knn_regressor":
        return KNNRegressor(n_neighbors=int(hp["n_neighbors"]))
    return BoostedStumps(learning_rate=float(hp["learning_rate"]),
                         max_iter=int(hp["max_iter"]), loss=hp["loss"])


def fit_predict_score(spec: ToyModelSpec, train: Dataset, test: Dataset,
                      metric: str = "r2") -> float:
    if len(train) == 0 or len(test) == 0:
        raise DomainError("train and test splits must be non-empty")
    model = make_model(spec).fit(train.X, train.y)
    return score(metric, test.y, model.predict(test.X))


def kfold_indices(n: int, k: int, seed: int) -> List[np.ndarray]:
    """Seeded shuffled partition of ``range(n)`` into ``k`` near-equal folds."""
    perm = np.random.default_rng(seed).permutation(n)
    return np.array_split(perm, k)


def kfold_cv_scores(spec: ToyModelSpec, dataset: Dataset, k: int = 3, metric: str = "r2",
                    seed: int = 0) -> List[float]:
    if k < 2:
        raise DomainError("k must be >= 2")
    if len(dataset) < 3 * k:
        raise DomainError(f"{len(dataset)} rows are too few for {k} folds (need {3 * k})")
    folds = kfold_indices(len(dataset), k, seed)
    scores = []
    for i, test_idx in enumerate(folds):
        train_idx = np.concatenate([f for j, f in enumerate(folds) if j != i])
        scores.append(fit_predict_score(spec, dataset.subset(train_idx),
                                        dataset.subset(test_idx), metric))
    return scores


def kfold_cv_score(spec: ToyModelSpec, dataset: Dataset, k: int = 3, metric: str = "r2",
                   seed: int = 0) -> float:
    """Mean validation score over ``k`` seeded folds."""
    return float(np.mean(kfold_cv_scores(spec, dataset, k, metric, seed)))


def train_test_split(dataset: Dataset, test_fraction: float = 0.25,
                     seed: int = 0) -> Tuple[Dataset, Dataset]:
    perm = np.random.default_rng(seed).permutation(len(dataset))
    n_test = max(1, int(round(test_fraction * len(dataset))))
    return dataset.subset(np.sort(perm[n_test:])), dataset.subset(np.sort(perm[:n_test]))
