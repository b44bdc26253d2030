"""Feature-matrix assembly with median imputation, and the train/test split."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np
import pandas as pd

from ..analytics import numeric_column, round_half_up
from ..ingest import Dataset

KEYS = ["student_id", "term_id"]


def infer_task(outcome: str) -> str:
    return "classification" if outcome == "discontinued" else "regression"


@dataclass
class FeatureMatrix:
    keys: pd.DataFrame
    X: np.ndarray
    columns: list[str]
    y: np.ndarray
    outcome: str
    task: str = "regression"
    medians: dict[str, float] = field(default_factory=dict)
    imputed: dict[str, int] = field(default_factory=dict)
    dropped_missing_outcome: int = 0

    def __len__(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def take(self, rows) -> "FeatureMatrix":
        rows = np.asarray(rows)
        return replace(self, keys=self.keys.iloc[rows].reset_index(drop=True), X=self.X[rows], y=self.y[rows])

    def select(self, columns: Sequence[str]) -> "FeatureMatrix":
        idx = [self.columns.index(c) for c in columns]
        return replace(
            self,
            X=self.X[:, idx],
            columns=list(columns),
            medians={c: self.medians[c] for c in columns},
            imputed={c: self.imputed.get(c, 0) for c in columns},
        )

    def frame(self) -> pd.DataFrame:
        out = self.keys.reset_index(drop=True).copy()
        for j, c in enumerate(self.columns):
            out[c] = self.X[:, j]
        out[self.outcome] = self.y
        return out


def _source_values(dataset: Dataset, name: str, source, keys: pd.DataFrame) -> np.ndarray:
    if isinstance(source, str) or source is None:
        col = source or name
        if col not in dataset.roster.columns:
            raise KeyError(f"roster has no column {col!r}")
        return numeric_column(dataset.roster[col]).to_numpy(dtype=float)
    table = source
    if "value" not in table.columns:
        raise ValueError(f"feature table {name!r} has no value column")
    if table.duplicated(KEYS).any():
        raise ValueError(f"feature table {name!r} has duplicate (student_id, term_id) rows")
    indexed = table.set_index(KEYS)["value"]
    return indexed.reindex(pd.MultiIndex.from_frame(keys)).to_numpy(dtype=float)


def assemble(dataset: Dataset, sources, outcome: str, task: str | None = None) -> FeatureMatrix:
    """Left-join feature sources onto roster keys and median-impute.

    ``sources`` is a mapping or a sequence of (name, source) pairs. A source
    is either a feature table with student_id, term_id, value columns or the
    name of a roster column. Rows with a missing outcome are dropped, never
    imputed.
    """
    pairs = list(sources.items()) if isinstance(sources, Mapping) else [(s, s) if isinstance(s, str) else tuple(s) for s in sources]
    names = [n for n, _ in pairs]
    dup = sorted({n for n in names if names.count(n) > 1})
    if dup:
        raise ValueError(f"duplicate feature column(s): {', '.join(dup)}")
    if outcome in names:
        raise ValueError(f"outcome {outcome!r} cannot also be a feature")
    if outcome not in dataset.roster.columns:
        raise KeyError(f"roster has no outcome column {outcome!r}")

    keys = dataset.roster_keys.reset_index(drop=True)
    y = numeric_column(dataset.roster[outcome]).to_numpy(dtype=float)
    X = np.column_stack([_source_values(dataset, n, s, keys) for n, s in pairs]) if pairs else np.zeros((len(keys), 0))

    has_y = np.isfinite(y)
    keys = keys[has_y].reset_index(drop=True)
    X = X[has_y]
    y = y[has_y]
    fm = FeatureMatrix(keys, X, names, y, outcome, task or infer_task(outcome))
    fm.dropped_missing_outcome = int((~has_y).sum())
    return impute(fm)


def impute(fm: FeatureMatrix) -> FeatureMatrix:
    """Fill missing cells with column medians computed over ``fm`` itself."""
    X = fm.X.copy()
    medians, imputed = {}, {}
    for j, c in enumerate(fm.columns):
        col = X[:, j]
        missing = ~np.isfinite(col)
        if missing.all():
            raise ValueError(f"feature column {c!r} has no values")
        med = float(np.median(col[~missing]))
        col[missing] = med
        medians[c] = med
        imputed[c] = int(missing.sum())
    return replace(fm, X=X, medians=medians, imputed=imputed)


def fill_missing(frame: pd.DataFrame, columns: Sequence[str], medians: Mapping[str, float]) -> np.ndarray:
    """Rows of ``frame`` as a matrix in ``columns`` order, NaNs filled from ``medians``."""
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise KeyError(f"rows lack model feature column(s): {', '.join(missing)}")
    X = frame[list(columns)].apply(pd.to_numeric, errors="coerce").to_numpy(dtype=float)
    for j, c in enumerate(columns):
        bad = ~np.isfinite(X[:, j])
        X[bad, j] = medians[c]
    return X


def split(matrix: FeatureMatrix, test_fraction: float = 0.2, seed: int = 0, stratify: str | None = None):
    """Seeded shuffle then partition into (train, test).

    ``stratify`` may be ``"outcome"`` or ``"term"`` to split within groups.
    """
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must be in (0, 1)")
    n = len(matrix)
    if n < 2:
        raise ValueError("need at least 2 rows to split")
    rng = np.random.default_rng(seed)
    if stratify is None:
        groups = [np.arange(n)]
    elif stratify == "outcome":
        groups = [np.flatnonzero(matrix.y == v) for v in np.unique(matrix.y)]
    elif stratify == "term":
        terms = matrix.keys["term_id"].to_numpy()
        groups = [np.flatnonzero(terms == t) for t in sorted(set(terms))]
    else:
        raise ValueError(f"unknown stratify option {stratify!r}")

    test_parts, train_parts = [], []
    for g in groups:
        perm = g[rng.permutation(g.size)]
        k = round_half_up(g.size * test_fraction)
        test_parts.append(perm[:k])
        train_parts.append(perm[k:])
    test_idx = np.concatenate(test_parts)
    train_idx = np.concatenate(train_parts)
    # keep both sides non-empty
    if test_idx.size == 0:
        test_idx, train_idx = train_idx[:1], train_idx[1:]
    elif train_idx.size == 0:
        train_idx, test_idx = test_idx[:1], test_idx[1:]
    return matrix.take(np.sort(train_idx)), matrix.take(np.sort(test_idx))
