"""Regression and classification metrics, ROC curve and two routes to AUC."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

DEFAULT_TOLERANCES = (0.5, 1.0)
# slack on |pred - actual| <= t so that e.g. 3.1 - 2.6 counts as within 0.5
_TOL_SLACK = 1e-9


@dataclass
class EvalReport:
    task: str
    n: int
    mse: float | None = None
    r2: float | None = None
    within_tolerance: dict[float, float] = field(default_factory=dict)
    accuracy: float | None = None
    roc_points: list[tuple[float, float]] = field(default_factory=list)
    auc: float | None = None
    auc_trapezoid: float | None = None

    @property
    def one_minus_r2(self) -> float | None:
        return None if self.r2 is None else 1.0 - self.r2

    @property
    def one_minus_auc(self) -> float | None:
        return None if self.auc is None else 1.0 - self.auc

    def to_dict(self) -> dict:
        d = {"task": self.task, "n": self.n}
        if self.task == "regression":
            d.update(
                mse=self.mse,
                r2=self.r2,
                one_minus_r2=self.one_minus_r2,
                within_tolerance={f"{k:g}": v for k, v in sorted(self.within_tolerance.items())},
            )
        else:
            d.update(
                accuracy=self.accuracy,
                auc=self.auc,
                auc_trapezoid=self.auc_trapezoid,
                one_minus_auc=self.one_minus_auc,
            )
        return d


def _pair(a, b):
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    return a, b


def evaluate_regression(preds, actuals, tolerances=DEFAULT_TOLERANCES) -> EvalReport:
    p, a = _pair(preds, actuals)
    if p.size < 2:
        raise ValueError("need at least 2 predictions")
    err = p - a
    mse = float(np.mean(err**2))
    sst = float(np.sum((a - a.mean()) ** 2))
    r2 = None if sst == 0 else 1.0 - float(np.sum(err**2)) / sst
    within = {float(t): float(np.mean(np.abs(err) <= t + _TOL_SLACK)) for t in sorted(tolerances)}
    return EvalReport("regression", int(p.size), mse=mse, r2=r2, within_tolerance=within)


def roc_curve(scores, labels) -> np.ndarray:
    """(fpr, tpr) points from (0, 0) to (1, 1), one per distinct score threshold."""
    s, y = _pair(scores, labels)
    n_pos = int((y == 1).sum())
    n_neg = int((y == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC needs both classes")
    order = np.argsort(-s, kind="mergesort")
    s, y = s[order], y[order]
    tp = np.cumsum(y == 1)
    fp = np.cumsum(y == 0)
    # last index of each block of tied scores
    ends = np.r_[np.flatnonzero(np.diff(s) != 0), s.size - 1]
    fpr = np.r_[0.0, fp[ends] / n_neg]
    tpr = np.r_[0.0, tp[ends] / n_pos]
    return np.column_stack([fpr, tpr])


def auc_trapezoid(points: np.ndarray) -> float:
    fpr, tpr = points[:, 0], points[:, 1]
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))


def auc_rank(scores, labels) -> float:
    """Mann-Whitney U / (n_pos * n_neg) with average ranks for ties."""
    s, y = _pair(scores, labels)
    pos = y == 1
    n_pos = int(pos.sum())
    n_neg = int((y == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both classes")
    ranks = rankdata(s, method="average")
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def evaluate_classification(scores, labels, threshold: float = 0.5) -> EvalReport:
    s, y = _pair(scores, labels)
    if not np.isin(y, (0.0, 1.0)).all():
        raise ValueError("labels must be 0 or 1")
    acc = float(np.mean((s >= threshold) == (y == 1)))
    report = EvalReport("classification", int(s.size), accuracy=acc)
    if np.unique(y).size == 2:
        pts = roc_curve(s, y)
        report.roc_points = [tuple(map(float, p)) for p in pts]
        report.auc = auc_rank(s, y)
        report.auc_trapezoid = auc_trapezoid(pts)
    return report
