"""Permutation importance, recursive feature elimination and a small grid runner."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .gbm import GbmParams, train_gbm
from .linear import train_linear
from .matrix import FeatureMatrix
from .metrics import auc_rank, evaluate_regression

# name -> (score function, higher is better)
_METRICS = {
    "mse": (lambda p, y: float(np.mean((p - y) ** 2)), False),
    "r2": (lambda p, y: evaluate_regression(p, y).r2 or 0.0, True),
    "auc": (auc_rank, True),
    "accuracy": (lambda p, y: float(np.mean((p >= 0.5) == (y == 1))), True),
}


def default_metric(task: str) -> str:
    return "auc" if task == "classification" else "mse"


@dataclass
class Importance:
    columns: list[str]
    mean: np.ndarray
    std: np.ndarray
    baseline: float
    metric: str

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.columns, map(float, self.mean)))

    def ranked(self) -> list[tuple[str, float]]:
        return sorted(self.as_dict().items(), key=lambda kv: (-kv[1], kv[0]))


def permutation_importance(model, test: FeatureMatrix, metric: str | None = None, repeats: int = 10, seed: int = 0) -> Importance:
    """Mean drop in ``metric`` when one column of ``test`` is shuffled.

    Positive values mean the model relies on the column.
    """
    if len(test) == 0:
        raise ValueError("test matrix is empty")
    metric = metric or default_metric(test.task)
    score, higher_better = _METRICS[metric]
    X = np.asarray(test.X, dtype=float)
    y = test.y
    base = score(model.predict(X), y)
    rng = np.random.default_rng(seed)
    means, stds = [], []
    for j in range(X.shape[1]):
        drops = []
        Xp = X.copy()
        for _ in range(repeats):
            Xp[:, j] = X[rng.permutation(X.shape[0]), j]
            s = score(model.predict(Xp), y)
            drops.append(base - s if higher_better else s - base)
        means.append(np.mean(drops))
        stds.append(np.std(drops))
    return Importance(list(test.columns), np.asarray(means), np.asarray(stds), base, metric)


@dataclass
class RfeResult:
    eliminated: list[tuple[str, float]] = field(default_factory=list)
    selected: list[str] = field(default_factory=list)

    @property
    def ranking(self) -> list[str]:
        """Survivors first, then eliminated features from last to first dropped."""
        return list(self.selected) + [f for f, _ in reversed(self.eliminated)]


def rfe(matrix: FeatureMatrix, params: GbmParams = GbmParams(), target_k: int = 5, task: str | None = None) -> RfeResult:
    """Refit the boosted ensemble and drop the lowest-gain feature until ``target_k`` remain.

    Ties in gain drop the earlier column.
    """
    if target_k < 1 or target_k >= matrix.n_features:
        raise ValueError(f"target_k must be in [1, {matrix.n_features - 1}], got {target_k}")
    current = list(matrix.columns)
    result = RfeResult()
    while len(current) > target_k:
        model = train_gbm(matrix.select(current), params, task)
        gain = model.feature_gain
        j = int(np.argmin(gain))
        result.eliminated.append((current[j], float(gain[j])))
        del current[j]
    final = train_gbm(matrix.select(current), params, task)
    order = np.argsort(-final.feature_gain, kind="stable")
    result.selected = [current[i] for i in order]
    return result


def train_family(train: FeatureMatrix, family: str, hyper: dict | None = None, task: str | None = None):
    hyper = dict(hyper or {})
    if family == "gbm":
        return train_gbm(train, GbmParams(**hyper), task)
    if family == "linear":
        return train_linear(train, task, **hyper)
    raise ValueError(f"unknown model family {family!r}")


def grid_search(train: FeatureMatrix, test: FeatureMatrix, family: str, grid: list[dict], task: str | None = None):
    """Fit each configuration on ``train`` and score it on ``test``.

    Returns (hyperparameters, EvalReport) pairs in grid order.
    """
    from . import evaluate

    results = []
    for hyper in grid:
        model = train_family(train, family, hyper, task)
        results.append((hyper, evaluate(model, test)))
    return results
