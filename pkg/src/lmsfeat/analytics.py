"""
Correlation machinery, cohort-disaggregated gap sweeps, correlation-based
feature ranking and per-term summary tables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
import pandas as pd

from .grade_features import DEDUP_KEYS
from .ingest import OUTCOMES, Dataset, assign_terms, full_time_students
from .login_features import DEFAULT_GRID, SweepResult, build_login_index

MIN_COHORT = 50


class Correlation(NamedTuple):
    r: float
    n: int
    degenerate: bool


def pearson(x, y) -> Correlation:
    """Sample Pearson correlation over pairwise-complete observations.

    Returns r = 0 flagged degenerate when fewer than two pairs remain or
    either variable has zero variance.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.shape} vs {y.shape}")
    ok = np.isfinite(x) & np.isfinite(y)
    x, y = x[ok], y[ok]
    n = x.size
    if n < 2:
        return Correlation(0.0, n, True)
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        return Correlation(0.0, n, True)
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return Correlation(min(1.0, max(-1.0, r)), n, False)


def correlate_columns(grid, matrix: np.ndarray, y: np.ndarray, min_population: int = 0) -> SweepResult:
    """Pearson r of every column of ``matrix`` against ``y`` (rows with y missing dropped)."""
    ok = np.isfinite(y)
    m = matrix[ok]
    yy = y[ok]
    n = int(ok.sum())
    corrs = np.zeros(m.shape[1])
    degenerate = n < 2
    if not degenerate:
        dy = yy - yy.mean()
        syy = float(dy @ dy)
        dm = m - m.mean(axis=0)
        sxx = np.einsum("ij,ij->j", dm, dm)
        if syy == 0.0:
            degenerate = True
        else:
            with np.errstate(invalid="ignore", divide="ignore"):
                r = (dm.T @ dy) / np.sqrt(sxx * syy)
            flat = sxx == 0.0
            r[flat] = 0.0
            corrs = np.clip(r, -1.0, 1.0)
            degenerate = bool(flat.all())
    return SweepResult(np.asarray(grid, dtype=float), corrs, n, degenerate, n < min_population)


def encode_categorical(values: pd.Series) -> pd.Series:
    """Integer codes ordered by descending frequency (ties by value); NaN stays NaN."""
    present = values.dropna().astype(str)
    counts = present.value_counts()
    order = sorted(counts.index, key=lambda v: (-counts[v], v))
    codes = {v: i for i, v in enumerate(order)}
    return values.map(lambda v: codes.get(str(v), np.nan) if pd.notna(v) else np.nan).astype(float)


def numeric_column(values: pd.Series) -> pd.Series:
    if pd.api.types.is_numeric_dtype(values) or pd.api.types.is_bool_dtype(values):
        return values.astype(float)
    return encode_categorical(values)


# --- cohorts ---------------------------------------------------------------

ATTEMPTED_BINS = (("<=3", -math.inf, 3), ("4-8", 4, 8), ("9-11", 9, 11), ("12-14", 12, 14), (">=15", 15, math.inf))
COMPLETED_BINS = (("<=30", -math.inf, 30), ("31-60", 31, 60), ("61-90", 61, 90), (">90", 91, math.inf))
COHORT_KEYS = {
    "major": "major",
    "attempted_hours_bin": "hours_attempted",
    "completed_hours_bin": "hours_completed",
}


@dataclass(frozen=True)
class CohortSpec:
    """How to partition roster rows into cohorts.

    ``bins`` are (label, low, high) inclusive ranges for the hour keys;
    ``major`` cohorts are the column's values, optionally capped to the
    ``top_k`` most populous.
    """

    key: str = "major"
    bins: tuple = ()
    top_k: int | None = None
    column: str | None = None
    min_population: int = MIN_COHORT

    def __post_init__(self):
        if self.key not in COHORT_KEYS:
            raise ValueError(f"unknown cohort key {self.key!r}; expected one of {sorted(COHORT_KEYS)}")
        if self.key != "major" and not self.bins:
            default = ATTEMPTED_BINS if self.key == "attempted_hours_bin" else COMPLETED_BINS
            object.__setattr__(self, "bins", default)
        edges = sorted((lo, hi) for _, lo, hi in self.bins)
        for (lo1, hi1), (lo2, _) in zip(edges, edges[1:]):
            if lo2 <= hi1:
                raise ValueError("cohort bins overlap")

    @property
    def source_column(self) -> str:
        return self.column or COHORT_KEYS[self.key]

    def labels(self, roster: pd.DataFrame) -> pd.Series:
        col = self.source_column
        if col not in roster.columns:
            raise KeyError(f"cohort column {col!r} not in roster")
        values = roster[col]
        if self.key == "major":
            labels = values.astype(object).where(values.notna(), None)
            if self.top_k is not None:
                counts = labels.dropna().value_counts()
                keep = sorted(counts.index, key=lambda v: (-counts[v], str(v)))[: self.top_k]
                labels = labels.where(labels.isin(keep), None)
            return labels
        nums = pd.to_numeric(values, errors="coerce")
        labels = pd.Series([None] * len(nums), index=roster.index, dtype=object)
        for label, lo, hi in self.bins:
            labels[(nums >= lo) & (nums <= hi)] = label
        unbinned = nums.notna() & labels.isna()
        if unbinned.any():
            example = nums[unbinned].iloc[0]
            raise ValueError(f"cohort bins do not cover observed value {example}")
        return labels

    def order(self, labels: pd.Series) -> list:
        if self.key == "major":
            counts = labels.dropna().value_counts()
            return sorted(counts.index, key=lambda v: (-counts[v], str(v)))
        present = set(labels.dropna())
        return [label for label, _, _ in self.bins if label in present]


@dataclass
class CohortSweep:
    spec: CohortSpec
    results: dict = field(default_factory=dict)

    def to_frame(self) -> pd.DataFrame:
        parts = []
        for label, res in self.results.items():
            f = res.to_frame()
            f["cohort"] = label
            parts.append(f)
        if not parts:
            return pd.DataFrame(columns=["gap_hours", "correlation", "cohort"])
        return pd.concat(parts, ignore_index=True)


def cohort_sweep(dataset: Dataset, spec: CohortSpec, grid=DEFAULT_GRID, outcome="semester_gpa", window=None, index=None) -> CohortSweep:
    """One gap sweep per cohort; cohorts under ``spec.min_population`` are flagged low-n."""
    if outcome not in dataset.roster.columns:
        raise KeyError(f"outcome column {outcome!r} not in roster")
    labels = spec.labels(dataset.roster).reset_index(drop=True)
    index = index if index is not None else build_login_index(dataset, window)
    grid = np.asarray(grid, dtype=float)
    counts = index.count_matrix(grid)
    y = pd.to_numeric(dataset.roster[outcome], errors="coerce").to_numpy(dtype=float)
    out = CohortSweep(spec)
    for label in spec.order(labels):
        mask = (labels == label).to_numpy()
        out.results[label] = correlate_columns(grid, counts[mask], y[mask], spec.min_population)
    return out


# --- ranking ---------------------------------------------------------------


@dataclass(frozen=True)
class RankedFeature:
    feature: str
    r: float
    n: int
    degenerate: bool = False


def rank_by_correlation(frame: pd.DataFrame, features: Sequence[str], outcomes: Sequence[str] = OUTCOMES) -> dict[str, list[RankedFeature]]:
    """Features sorted by |r| against each outcome; ties go to the smaller name.

    Categorical columns are frequency-coded first. The boolean outcome is
    correlated as 0/1 (point-biserial).
    """
    ranked = {}
    for outcome in outcomes:
        y = numeric_column(frame[outcome]).to_numpy()
        rows = []
        for f in features:
            c = pearson(numeric_column(frame[f]).to_numpy(), y)
            rows.append(RankedFeature(f, c.r, c.n, c.degenerate))
        rows.sort(key=lambda rf: (-abs(rf.r), rf.feature))
        ranked[outcome] = rows
    return ranked


def ranking_frame(ranked: dict[str, list[RankedFeature]]) -> pd.DataFrame:
    records = []
    for outcome, rows in ranked.items():
        for i, rf in enumerate(rows, 1):
            records.append({"outcome": outcome, "rank": i, "feature": rf.feature, "r": rf.r, "n": rf.n})
    return pd.DataFrame(records, columns=["outcome", "rank", "feature", "r", "n"])


# --- term summary ----------------------------------------------------------


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass
class TermSummaryRow:
    term_id: str
    students: int
    total_logins: int
    courses: int = 0
    total_grades: int = 0
    unique_grades_by_period: tuple[int, int, int] = (0, 0, 0)

    @property
    def logins_per_student(self) -> int:
        return round_half_up(self.total_logins / self.students) if self.students else 0

    @property
    def unique_grades(self) -> int:
        return sum(self.unique_grades_by_period)

    def as_dict(self) -> dict:
        first, second, rest = self.unique_grades_by_period
        return {
            "term_id": self.term_id,
            "students": self.students,
            "total_logins": self.total_logins,
            "logins_per_student": self.logins_per_student,
            "courses": self.courses,
            "total_grades": self.total_grades,
            "unique_first_4_weeks": first,
            "unique_next_4_weeks": second,
            "unique_rest_of_term": rest,
        }


PERIODS = ((1, 4), (5, 8), (9, None))


def term_summary(dataset: Dataset, full_time_threshold: float | None = 12.0) -> list[TermSummaryRow]:
    """Per-term counts in calendar order.

    With a threshold, students and logins are restricted to students whose
    enrolled credit hours reach it; ``None`` counts every login in the term,
    orphans included.
    """
    terms = list(dataset.calendars)
    roster = dataset.roster_keys
    if full_time_threshold is not None:
        population = full_time_students(dataset, full_time_threshold)
        population = population.merge(roster, on=["student_id", "term_id"], how="inner")
    else:
        population = roster

    ns = dataset.login_ns()
    term_pos, _ = assign_terms(dataset, ns)
    student_cat = dataset.logins["student_id"].cat
    login_codes = student_cat.codes.to_numpy()

    g = dataset.grades
    g_pos, g_weeks = assign_terms(dataset, g["awarded_at"].array.asi8) if len(g) else (np.zeros(0, int), np.zeros(0, int))

    rows = []
    for pos, term in enumerate(terms):
        pop = population[population["term_id"] == term]
        in_term = term_pos == pos
        if full_time_threshold is not None:
            member = np.zeros(len(student_cat.categories) + 1, dtype=bool)
            codes = pd.Categorical(pop["student_id"], categories=student_cat.categories).codes
            member[codes[codes >= 0]] = True
            n_logins = int(member[login_codes[in_term]].sum())
        else:
            n_logins = int(in_term.sum())
        courses = dataset.enrollments.loc[dataset.enrollments["term_id"] == term, "course_id"].nunique()

        g_term = g_pos == pos
        period_counts = []
        for lo, hi in PERIODS:
            m = g_term & (g_weeks >= lo)
            if hi is not None:
                m &= g_weeks <= hi
            period_counts.append(int(len(g.loc[m].drop_duplicates(DEDUP_KEYS))))
        rows.append(
            TermSummaryRow(term, len(pop), n_logins, int(courses), int(g_term.sum()), tuple(period_counts))
        )
    return rows


def summary_total(rows: Sequence[TermSummaryRow]) -> TermSummaryRow:
    periods = tuple(int(sum(r.unique_grades_by_period[i] for r in rows)) for i in range(3))
    return TermSummaryRow(
        "Total",
        sum(r.students for r in rows),
        sum(r.total_logins for r in rows),
        sum(r.courses for r in rows),
        sum(r.total_grades for r in rows),
        periods,
    )


def summary_frame(rows: Sequence[TermSummaryRow], total: bool = True) -> pd.DataFrame:
    rows = list(rows)
    if total and rows:
        rows.append(summary_total(rows))
    return pd.DataFrame([r.as_dict() for r in rows])


def format_table(frame: pd.DataFrame, float_fmt: str = "{:.4f}") -> str:
    """Aligned plain-text rendering; numbers right-aligned, text left-aligned."""
    cols = [str(c) for c in frame.columns]

    def cell(v):
        if isinstance(v, (float, np.floating)):
            return "" if np.isnan(v) else float_fmt.format(v)
        if isinstance(v, (int, np.integer)):
            return f"{v:,}"
        return str(v)

    body = [[cell(v) for v in row] for row in frame.itertuples(index=False)]
    numeric = [pd.api.types.is_numeric_dtype(frame[c]) for c in frame.columns]
    widths = [max([len(c)] + [len(r[i]) for r in body]) for i, c in enumerate(cols)]

    def line(values):
        return "  ".join(v.rjust(w) if num else v.ljust(w) for v, w, num in zip(values, widths, numeric)).rstrip()

    out = [line(cols), "  ".join("-" * w for w in widths)]
    out.extend(line(r) for r in body)
    return "\n".join(out)
