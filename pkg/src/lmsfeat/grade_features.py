"""
Grade features: keep-last dedup, grade-value parsing and the aggregation
variants (flat ratio, flat value mean, per-course rollups with or without
credit weighting, course-median-normalized points).

Per-student functions take that student's deduped grade records as a
DataFrame with the ingest grade columns. ``grade_feature_table`` is the
vectorized equivalent over a whole dataset.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from .ingest import Dataset, TermCalendar, assign_terms, in_window, parse_window

log = logging.getLogger(__name__)

DEDUP_KEYS = ["student_id", "course_id", "grade_item_id"]

BASE_METRICS = ("ratio", "value", "median_normalized")
ROLLUPS = ("flat", "per_course_unweighted", "per_course_credit_weighted")


@dataclass(frozen=True)
class GradeVariant:
    base_metric: str = "value"
    course_rollup: str = "flat"

    def __post_init__(self):
        if self.base_metric not in BASE_METRICS:
            raise ValueError(f"unknown base metric {self.base_metric!r}")
        if self.course_rollup not in ROLLUPS:
            raise ValueError(f"unknown course rollup {self.course_rollup!r}")
        if self.base_metric == "median_normalized" and self.course_rollup == "flat":
            raise ValueError("median_normalized needs a per-course rollup")

    @property
    def weighted(self) -> bool:
        return self.course_rollup == "per_course_credit_weighted"

    @property
    def name(self) -> str:
        suffix = {"flat": "", "per_course_unweighted": "_course", "per_course_credit_weighted": "_credit"}
        base = {"ratio": "ratio", "value": "value", "median_normalized": "median"}
        return base[self.base_metric] + suffix[self.course_rollup]

    @classmethod
    def parse(cls, name: str) -> "GradeVariant":
        """``ratio``, ``value_course``, ``median_credit``, ..."""
        base, _, roll = name.strip().lower().removeprefix("grade_").partition("_")
        bases = {"ratio": "ratio", "value": "value", "median": "median_normalized"}
        rolls = {"": "flat", "course": "per_course_unweighted", "credit": "per_course_credit_weighted"}
        if base not in bases or roll not in rolls:
            raise ValueError(f"unknown grade variant {name!r}")
        return cls(bases[base], rolls[roll])


class LetterMap:
    """Raw grade strings mapped to a 0-100 scale (matched trimmed, case-folded)."""

    def __init__(self, pairs):
        self.pairs = [(str(raw), float(value)) for raw, value in pairs]
        self._lookup: dict[str, float] = {}
        for raw, value in self.pairs:
            key = raw.strip().casefold()
            if key in self._lookup:
                raise ValueError(f"duplicate letter grade {raw!r}")
            if not 0 <= value <= 100:
                raise ValueError(f"letter grade {raw!r} maps outside [0, 100]")
            self._lookup[key] = value

    def get(self, raw: str) -> float | None:
        return self._lookup.get(raw.strip().casefold())

    def as_dict(self) -> dict[str, float]:
        return dict(self._lookup)

    @classmethod
    def from_csv(cls, path) -> "LetterMap":
        df = pd.read_csv(Path(path), dtype=str, keep_default_na=False)
        if list(df.columns[:2]) != ["raw", "value"]:
            raise ValueError(f"{path}: letter map needs header raw,value")
        return cls(zip(df["raw"], df["value"].astype(float)))

    def to_csv(self, path) -> None:
        pd.DataFrame(self.pairs, columns=["raw", "value"]).to_csv(path, index=False)

    def __eq__(self, other):
        return isinstance(other, LetterMap) and self.pairs == other.pairs


DEFAULT_LETTER_MAP = LetterMap(
    [("A+", 98), ("A", 95), ("A-", 92), ("B+", 88), ("B", 85), ("B-", 82), ("C+", 78), ("C", 75)]
)


def parse_grade_value(raw, letter_map: LetterMap = DEFAULT_LETTER_MAP) -> float | None:
    if raw is None or (isinstance(raw, float) and math.isnan(raw)):
        return None
    text = str(raw)
    try:
        value = float(text)
    except ValueError:
        return letter_map.get(text)
    return value if math.isfinite(value) else letter_map.get(text)


def parse_grade_values(raw: pd.Series, letter_map: LetterMap = DEFAULT_LETTER_MAP) -> np.ndarray:
    """Vectorized :func:`parse_grade_value`; NaN marks absent."""
    text = raw.astype(object).where(raw.notna(), None)
    nums = pd.to_numeric(text, errors="coerce").to_numpy(dtype=float)
    nums[~np.isfinite(nums)] = np.nan
    todo = np.isnan(nums) & text.notna().to_numpy()
    if todo.any():
        mapped = text[todo].astype(str).str.strip().str.casefold().map(letter_map.as_dict())
        nums[todo] = mapped.to_numpy(dtype=float)
    return nums


def dedup_last(grades: pd.DataFrame) -> pd.DataFrame:
    """One record per (student, course, grade item): the last awarded.

    Ties on ``awarded_at`` go to the larger ``source_row``. Output is sorted
    by the key columns.
    """
    if grades.empty:
        return grades.copy()
    ordered = grades.sort_values(DEDUP_KEYS + ["awarded_at", "source_row"], kind="mergesort")
    return ordered.drop_duplicates(DEDUP_KEYS, keep="last").reset_index(drop=True)


def window_grades(grades: pd.DataFrame, calendar: TermCalendar | None = None, window=None, tz: str = "UTC") -> pd.DataFrame:
    """Records awarded inside the first ``window`` weeks of ``calendar``."""
    bound = parse_window(window)
    if calendar is None:
        if bound is not None:
            raise ValueError("a calendar is needed for a partial-term window")
        return grades
    if grades.empty:
        return grades
    weeks = calendar.weeks(grades["awarded_at"].array.asi8, tz)
    return grades.loc[in_window(weeks, bound)]


def _points(grades: pd.DataFrame) -> tuple[np.ndarray, np.ndarray]:
    return (
        grades["points_numerator"].to_numpy(dtype=float),
        grades["points_denominator"].to_numpy(dtype=float),
    )


def _ratio(grades: pd.DataFrame) -> float | None:
    num, den = _points(grades)
    ok = np.isfinite(num) & np.isfinite(den) & (den > 0)
    if not ok.any():
        return None
    return float(num[ok].sum() / den[ok].sum())


def _value(grades: pd.DataFrame, letter_map: LetterMap) -> float | None:
    vals = [v for v in (parse_grade_value(r, letter_map) for r in grades["grade_value"]) if v is not None]
    return float(np.mean(vals)) if vals else None


def ratio_feature(grades: pd.DataFrame, window=None, calendar: TermCalendar | None = None) -> float | None:
    """Sum of numerators over sum of denominators, ignoring course.

    Only records carrying both points with a positive denominator count.
    """
    return _ratio(window_grades(grades, calendar, window))


def value_feature(grades: pd.DataFrame, letter_map: LetterMap = DEFAULT_LETTER_MAP, window=None, calendar=None) -> float | None:
    return _value(window_grades(grades, calendar, window), letter_map)


def _credit_lookup(enrollments: pd.DataFrame | None) -> dict[str, float]:
    if enrollments is None or enrollments.empty:
        return {}
    return dict(zip(enrollments["course_id"], enrollments["credit_hours"].astype(float)))


def _rollup(course_values: dict[str, float], credits: dict[str, float], weighted: bool) -> float | None:
    if not course_values:
        return None
    values = np.array(list(course_values.values()), dtype=float)
    if not weighted:
        return float(values.sum() / values.size)
    missing = [c for c in course_values if c not in credits]
    if missing:
        log.warning("no enrollment for course(s) %s; using credit weight 1", ", ".join(sorted(missing)))
    weights = np.array([credits.get(c, 1.0) for c in course_values], dtype=float)
    if weights.max() <= 0:
        return None
    # relative weights are exactly 1 when credits are equal, matching the unweighted mean
    weights = weights / weights.max()
    return float((values * weights).sum() / weights.sum())


def course_rollup_feature(
    grades: pd.DataFrame,
    enrollments: pd.DataFrame | None,
    variant: GradeVariant,
    letter_map: LetterMap = DEFAULT_LETTER_MAP,
    window=None,
    calendar: TermCalendar | None = None,
) -> float | None:
    """Per-course ratio or value, then averaged across courses (optionally by credit hours)."""
    if variant.base_metric == "median_normalized":
        raise ValueError("use median_normalized_feature for median-normalized variants")
    g = window_grades(grades, calendar, window)
    per_course = {}
    for course, rows in g.groupby("course_id", sort=True):
        v = _ratio(rows) if variant.base_metric == "ratio" else _value(rows, letter_map)
        if v is not None:
            per_course[course] = v
    return _rollup(per_course, _credit_lookup(enrollments), variant.weighted)


def course_median_points(course_grades: pd.DataFrame, window=None, calendar: TermCalendar | None = None) -> float | None:
    """Median over students of each student's summed numerators in one course.

    Students without any numerator are left out; a non-positive median is
    treated as absent since it cannot normalize.
    """
    g = window_grades(course_grades, calendar, window)
    g = g[g["points_numerator"].notna()]
    if g.empty:
        return None
    sums = g.groupby("student_id")["points_numerator"].sum().to_numpy(dtype=float)
    med = float(np.median(sums))
    return med if med > 0 else None


def median_normalized_feature(
    grades: pd.DataFrame,
    enrollments: pd.DataFrame | None,
    course_medians: dict[str, float | None],
    weighted: bool = False,
    window=None,
    calendar: TermCalendar | None = None,
) -> float | None:
    g = window_grades(grades, calendar, window)
    g = g[g["points_numerator"].notna()]
    per_course = {}
    for course, rows in g.groupby("course_id", sort=True):
        med = course_medians.get(course)
        if med is None or not med > 0:
            continue
        per_course[course] = float(rows["points_numerator"].sum()) / med
    return _rollup(per_course, _credit_lookup(enrollments), weighted)


def scale_audit(values: pd.DataFrame) -> pd.DataFrame:
    """Student-terms whose parsed values mix a 4-point and a 100-point scale.

    ``values`` has columns student_id, term_id, parsed.
    """
    v = values.dropna(subset=["parsed"])
    low = (v["parsed"] >= 0) & (v["parsed"] <= 4)
    high = (v["parsed"] >= 50) & (v["parsed"] <= 100)
    flags = pd.DataFrame({"student_id": v["student_id"], "term_id": v["term_id"], "low": low, "high": high})
    agg = flags.groupby(["student_id", "term_id"], sort=True)[["low", "high"]].any()
    return agg[agg["low"] & agg["high"]].reset_index()[["student_id", "term_id"]]


# --- dataset-level table -----------------------------------------------------


def term_grades(dataset: Dataset, window=None) -> pd.DataFrame:
    """Grades tagged with term_id, restricted to the window, then deduped.

    Window filtering happens first, so later updates cannot leak into an
    early-window feature.
    """
    g = dataset.grades
    if g.empty:
        out = g.copy()
        out["term_id"] = pd.Series(dtype=str)
        return out
    term_pos, weeks = assign_terms(dataset, g["awarded_at"].array.asi8)
    keep = (term_pos >= 0) & in_window(weeks, window)
    terms = np.array(list(dataset.calendars), dtype=object)
    out = g.loc[keep].copy()
    out["term_id"] = terms[term_pos[keep]] if keep.any() else pd.Series(dtype=str)
    # an item is deduped within its term
    out = out.sort_values(["term_id"] + DEDUP_KEYS + ["awarded_at", "source_row"], kind="mergesort")
    out = out.drop_duplicates(["term_id"] + DEDUP_KEYS, keep="last")
    return out.reset_index(drop=True)


def _ratio_by(g: pd.DataFrame, keys: list[str]) -> pd.Series:
    ok = g["points_numerator"].notna() & g["points_denominator"].notna() & (g["points_denominator"] > 0)
    sub = g.loc[ok]
    sums = sub.groupby(keys, sort=True)[["points_numerator", "points_denominator"]].sum()
    return sums["points_numerator"] / sums["points_denominator"]


def _value_by(g: pd.DataFrame, keys: list[str], letter_map: LetterMap) -> pd.Series:
    parsed = pd.Series(parse_grade_values(g["grade_value"], letter_map), index=g.index)
    sub = g.assign(parsed=parsed).dropna(subset=["parsed"])
    return sub.groupby(keys, sort=True)["parsed"].mean()


def _rollup_by(course_values: pd.Series, enrollments: pd.DataFrame, weighted: bool) -> pd.Series:
    keys = ["student_id", "term_id"]
    cv = course_values.rename("v").reset_index()
    if not weighted:
        grouped = cv.groupby(keys, sort=True)["v"]
        return grouped.sum() / grouped.count()
    cv = cv.merge(
        enrollments[["student_id", "course_id", "term_id", "credit_hours"]],
        on=["student_id", "term_id", "course_id"],
        how="left",
    )
    n_missing = int(cv["credit_hours"].isna().sum())
    if n_missing:
        log.warning("%d student-course pairs without enrollment; using credit weight 1", n_missing)
    cv["w"] = cv["credit_hours"].fillna(1.0)
    top = cv.groupby(keys, sort=True)["w"].transform("max")
    cv = cv[top > 0]
    cv["w"] = cv["w"] / top[top > 0]
    cv["vw"] = cv["v"] * cv["w"]
    sums = cv.groupby(keys, sort=True)[["vw", "w"]].sum()
    return sums["vw"] / sums["w"]


def course_medians_table(g: pd.DataFrame) -> pd.Series:
    """Course median of per-student numerator sums, indexed by (term_id, course_id)."""
    sub = g[g["points_numerator"].notna()]
    sums = sub.groupby(["term_id", "course_id", "student_id"], sort=True)["points_numerator"].sum()
    med = sums.groupby(level=["term_id", "course_id"], sort=True).median()
    return med[med > 0]


def grade_feature_table(
    dataset: Dataset,
    variant: GradeVariant = GradeVariant(),
    letter_map: LetterMap = DEFAULT_LETTER_MAP,
    window=None,
) -> pd.DataFrame:
    """One row per roster (student, term); ``value`` is NaN when absent."""
    g = term_grades(dataset, window)
    keys = ["student_id", "term_id"]
    course_keys = keys + ["course_id"]
    if g.empty:
        values = pd.Series(dtype=float)
    elif variant.course_rollup == "flat":
        if variant.base_metric == "ratio":
            values = _ratio_by(g, keys)
        else:
            values = _value_by(g, keys, letter_map)
    elif variant.base_metric == "median_normalized":
        medians = course_medians_table(g).rename("median").reset_index()
        sub = g[g["points_numerator"].notna()]
        sums = sub.groupby(course_keys, sort=True)["points_numerator"].sum().rename("num").reset_index()
        sums = sums.merge(medians, on=["term_id", "course_id"], how="inner")
        per_course = (sums["num"] / sums["median"]).set_axis(pd.MultiIndex.from_frame(sums[course_keys]))
        values = _rollup_by(per_course, dataset.enrollments, variant.weighted)
    else:
        if variant.base_metric == "ratio":
            per_course = _ratio_by(g, course_keys)
        else:
            per_course = _value_by(g, course_keys, letter_map)
        values = _rollup_by(per_course, dataset.enrollments, variant.weighted)

    if variant.base_metric == "value" and not g.empty:
        parsed = g[keys].assign(parsed=parse_grade_values(g["grade_value"], letter_map))
        mixed = scale_audit(parsed)
        if len(mixed):
            log.warning("%d student-terms mix 4-point and 100-point grade values", len(mixed))

    out = dataset.roster_keys.reset_index(drop=True).copy()
    if len(values):
        idx = pd.MultiIndex.from_frame(out)
        out["value"] = values.reindex(idx).to_numpy(dtype=float)
    else:
        out["value"] = np.nan
    return out
