"""Ridge regression and L2-penalized logistic regression baselines."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .gbm import _sigmoid, check_labels
from .matrix import FeatureMatrix


@dataclass
class LinearModel:
    task: str
    columns: list[str]
    coef: np.ndarray
    intercept: float
    penalty: float
    medians: dict[str, float] = field(default_factory=dict)
    iterations: int = 0
    family: str = "linear"

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != len(self.columns):
            raise ValueError(f"expected {len(self.columns)} feature columns, got shape {X.shape}")
        z = X @ self.coef + self.intercept
        return _sigmoid(z) if self.task == "classification" else z

    def importance(self) -> dict[str, float]:
        return dict(zip(self.columns, map(float, np.abs(self.coef))))

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "task": self.task,
            "columns": list(self.columns),
            "medians": dict(self.medians),
            "coef": self.coef.tolist(),
            "intercept": self.intercept,
            "penalty": self.penalty,
            "iterations": self.iterations,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LinearModel":
        return cls(
            d["task"],
            list(d["columns"]),
            np.asarray(d["coef"], dtype=float),
            float(d["intercept"]),
            float(d["penalty"]),
            {k: float(v) for k, v in d["medians"].items()},
            int(d.get("iterations", 0)),
        )


def _standardize(X):
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    usable = scale > 0
    Z = np.zeros_like(X)
    Z[:, usable] = (X[:, usable] - mean[usable]) / scale[usable]
    return Z, mean, scale, usable


def _ridge(Z, y, penalty):
    n, p = Z.shape
    A = Z.T @ Z / n + penalty * np.eye(p)
    b = Z.T @ (y - y.mean()) / n
    try:
        return np.linalg.solve(A, b)
    except np.linalg.LinAlgError:
        return np.linalg.lstsq(A, b, rcond=None)[0]


def _logistic(Z, y, penalty, tol=1e-6, max_iter=200):
    """Newton's method on mean log-loss + penalty * |beta|^2 (intercept free)."""
    n, p = Z.shape
    A = np.column_stack([np.ones(n), Z])
    w = np.zeros(p + 1)
    ybar = y.mean()
    w[0] = np.log(ybar / (1 - ybar))
    reg = np.full(p + 1, 2 * penalty)
    reg[0] = 0.0

    def objective(w):
        z = A @ w
        return np.mean(np.logaddexp(0.0, z) - y * z) + penalty * (w[1:] @ w[1:])

    it = 0
    for it in range(1, max_iter + 1):
        q = _sigmoid(A @ w)
        grad = A.T @ (q - y) / n + reg * w
        if np.linalg.norm(grad) < tol:
            break
        H = (A * (q * (1 - q))[:, None]).T @ A / n + np.diag(reg) + 1e-12 * np.eye(p + 1)
        step = np.linalg.solve(H, grad)
        f0 = objective(w)
        t = 1.0
        while objective(w - t * step) > f0 - 1e-4 * t * (grad @ step) and t > 1e-10:
            t *= 0.5
        w = w - t * step
    return w[0], w[1:], it


def train_linear(train: FeatureMatrix, task: str | None = None, penalty: float = 1e-4) -> LinearModel:
    """Fit on standardized features; coefficients are reported on the original scale.

    Zero-variance columns get coefficient 0.
    """
    task = task or train.task
    X = np.asarray(train.X, dtype=float)
    y = np.asarray(train.y, dtype=float)
    check_labels(task, y)
    if penalty < 0:
        raise ValueError("penalty must be >= 0")
    Z, mean, scale, usable = _standardize(X)
    beta = np.zeros(X.shape[1])
    iterations = 0
    if task == "regression":
        if usable.any():
            beta[usable] = _ridge(Z[:, usable], y, penalty)
        b0 = y.mean()
    else:
        b0, b, iterations = _logistic(Z[:, usable], y, penalty)
        beta[usable] = b
    coef = np.zeros(X.shape[1])
    coef[usable] = beta[usable] / scale[usable]
    intercept = float(b0 - coef @ np.where(usable, mean, 0.0))
    return LinearModel(task, list(train.columns), coef, intercept, penalty, dict(train.medians), iterations)
