"""
Per-student-term login features.

Periodic logins are counted with a greedy minimum-gap filter: keep the first
login, then keep each later login only if it is at least ``min_gap`` hours
after the last kept one. Variants cap the gap from above or count distinct
12/24-hour periods instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np
import pandas as pd

from .ingest import Dataset, assign_terms, in_window, parse_window

HOUR_NS = 3600 * 10**9
DEFAULT_GRID = np.arange(0.0, 48.0 + 0.25, 0.5)
DEFAULT_MIN_GAP = 11.0


class UnsortedTimestampsError(ValueError):
    pass


@dataclass(frozen=True)
class GapParams:
    """Counting mode for one login feature column.

    ``period_len`` switches to distinct-period counting and excludes the
    gap-based parameters.
    """

    min_gap: float = 0.0
    max_gap: float | None = None
    period_len: float | None = None

    def __post_init__(self):
        if self.min_gap < 0:
            raise ValueError("min_gap must be >= 0")
        if self.max_gap is not None and self.max_gap < self.min_gap:
            raise ValueError("max_gap must be >= min_gap")
        if self.period_len is not None:
            if self.period_len not in (12, 24):
                raise ValueError("period_len must be 12 or 24 hours")
            if self.max_gap is not None or self.min_gap > 0:
                raise ValueError("period counting cannot be combined with gap filtering")

    @property
    def mode(self) -> str:
        if self.period_len is not None:
            return "period"
        return "periodic" if self.max_gap is None else "capped"


@dataclass
class SweepResult:
    grid: np.ndarray
    correlations: np.ndarray
    n: int = 0
    degenerate: bool = False
    low_n: bool = False

    @property
    def peak_index(self) -> int:
        # argmax returns the first maximum, i.e. the smaller gap on ties
        return int(np.argmax(self.correlations))

    @property
    def peak_gap(self) -> float:
        return float(self.grid[self.peak_index])

    @property
    def peak_r(self) -> float:
        return float(self.correlations[self.peak_index])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"gap_hours": self.grid, "correlation": self.correlations})


# --- kernels -----------------------------------------------------------------


@numba.njit(cache=True, nogil=True)
def _greedy_counts(t, offsets, min_gap, max_gap):
    n_groups = offsets.shape[0] - 1
    out = np.zeros(n_groups, dtype=np.int64)
    for g in range(n_groups):
        lo = offsets[g]
        hi = offsets[g + 1]
        if hi == lo:
            continue
        last = t[lo]
        count = 1
        for i in range(lo + 1, hi):
            gap = t[i] - last
            if gap >= min_gap and gap <= max_gap:
                last = t[i]
                count += 1
        out[g] = count
    return out


@numba.njit(cache=True, nogil=True)
def _period_counts(t, offsets, origins, period):
    n_groups = offsets.shape[0] - 1
    out = np.zeros(n_groups, dtype=np.int64)
    for g in range(n_groups):
        lo = offsets[g]
        hi = offsets[g + 1]
        count = 0
        prev = -(2**62)
        for i in range(lo, hi):
            b = np.int64(math.floor((t[i] - origins[g]) / period))
            if b != prev:
                count += 1
                prev = b
        out[g] = count
    return out


# --- single-student functions ------------------------------------------------


def _hours(timestamps) -> np.ndarray:
    arr = np.asarray(timestamps)
    if arr.size == 0:
        return np.zeros(0, dtype=np.float64)
    if arr.dtype.kind in "Mm" or arr.dtype == object:
        ns = pd.to_datetime(pd.Series(list(timestamps)), utc=True).array.asi8
        return ns / HOUR_NS
    return arr.astype(np.float64)


def _checked(timestamps) -> np.ndarray:
    t = _hours(timestamps)
    if t.size > 1 and np.any(np.diff(t) < 0):
        raise UnsortedTimestampsError("timestamps must be sorted ascending")
    return t


def periodic_login_count(timestamps, min_gap: float) -> int:
    """Number of logins kept by the greedy minimum-gap filter.

    ``timestamps`` are hours (floats) or datetimes, sorted ascending.
    """
    t = _checked(timestamps)
    return int(_greedy_counts(t, np.array([0, t.size]), float(min_gap), np.inf)[0])


def capped_login_count(timestamps, min_gap: float, max_gap: float) -> int:
    """Like :func:`periodic_login_count`, but a candidate more than ``max_gap``
    hours after the last kept login is dropped without becoming the new anchor."""
    if max_gap < min_gap:
        raise ValueError("max_gap must be >= min_gap")
    t = _checked(timestamps)
    return int(_greedy_counts(t, np.array([0, t.size]), float(min_gap), float(max_gap))[0])


def distinct_period_count(timestamps, period_len: float, origin) -> int:
    t = _checked(timestamps)
    if isinstance(origin, (int, float, np.integer, np.floating)):
        o = float(origin)
    else:
        o = _hours([origin])[0]
    if t.size == 0:
        return 0
    return int(np.unique(np.floor((t - o) / period_len)).size)


# --- dataset-level tables ----------------------------------------------------


@dataclass
class LoginIndex:
    """Windowed logins grouped by roster row and sorted by time.

    Times are seconds since the epoch stored as float64 (exact at this scale).
    """

    keys: pd.DataFrame
    times: np.ndarray
    offsets: np.ndarray
    origins: np.ndarray
    window: int | None = None

    @property
    def n_logins(self) -> int:
        return int(self.offsets[-1])

    def counts(self, params: GapParams) -> np.ndarray:
        if params.mode == "period":
            return _period_counts(self.times, self.offsets, self.origins, params.period_len * 3600.0)
        max_gap = np.inf if params.max_gap is None else params.max_gap * 3600.0
        return _greedy_counts(self.times, self.offsets, params.min_gap * 3600.0, max_gap)

    def count_matrix(self, grid) -> np.ndarray:
        """Periodic counts for every gap in ``grid``; shape (rows, len(grid))."""
        grid = np.asarray(grid, dtype=float)
        out = np.empty((len(self.keys), grid.size), dtype=np.float64)
        for j, g in enumerate(grid):
            out[:, j] = self.counts(GapParams(min_gap=float(g)))
        return out


def build_login_index(dataset: Dataset, window=None) -> LoginIndex:
    """Group roster students' in-term logins inside ``window``.

    Logins outside the window are dropped before any gap filtering. Logins of
    students absent from the roster for that term are ignored.
    """
    bound = parse_window(window)
    roster = dataset.roster_keys.reset_index(drop=True)
    terms = list(dataset.calendars)
    ns = dataset.login_ns()
    term_pos, weeks = assign_terms(dataset, ns)
    keep = (term_pos >= 0) & in_window(weeks, bound)

    student_cat = dataset.logins["student_id"].cat
    n_cats = len(student_cat.categories)
    codes = student_cat.codes.to_numpy()

    # row lookup per (term position, student category code)
    row_of = np.full((max(len(terms), 1), n_cats + 1), -1, dtype=np.int64)
    term_index = {t: i for i, t in enumerate(terms)}
    r_term = roster["term_id"].map(term_index)
    known = r_term.notna().to_numpy()
    r_codes = pd.Categorical(roster["student_id"], categories=student_cat.categories).codes
    ok = known & (r_codes >= 0)
    row_of[r_term[ok].astype(np.int64).to_numpy(), r_codes[ok]] = np.flatnonzero(ok)

    sel = np.flatnonzero(keep & (codes >= 0))
    rows = row_of[term_pos[sel], codes[sel]]
    valid = rows >= 0
    sel, rows = sel[valid], rows[valid]
    secs = ns[sel] // 10**9
    if secs.size:
        base = secs.min()
        order = np.argsort(rows * (1 << 34) + (secs - base), kind="stable")
    else:
        order = np.zeros(0, dtype=np.int64)
    rows = rows[order]
    times = secs[order].astype(np.float64)
    offsets = np.zeros(len(roster) + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=len(roster)), out=offsets[1:])

    origin_by_term = {
        t: cal.start_instant_ns(dataset.tz) / 10**9 for t, cal in dataset.calendars.items()
    }
    origins = roster["term_id"].map(origin_by_term).fillna(0.0).to_numpy(dtype=np.float64)
    return LoginIndex(roster, times, offsets, origins, bound)


def login_feature_table(dataset: Dataset, params: GapParams, window=None, index: LoginIndex | None = None) -> pd.DataFrame:
    """One row per roster (student, term) with the login count under ``params``."""
    index = index if index is not None else build_login_index(dataset, window)
    out = index.keys.copy()
    out["value"] = index.counts(params)
    return out


def gap_sweep(dataset: Dataset, grid=DEFAULT_GRID, outcome: str = "semester_gpa", window=None, index=None) -> SweepResult:
    """Correlate periodic login counts with ``outcome`` across a grid of minimum gaps."""
    from .analytics import correlate_columns

    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("grid must be non-empty")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly ascending")
    if outcome not in dataset.roster.columns:
        raise KeyError(f"outcome column {outcome!r} not in roster")
    index = index if index is not None else build_login_index(dataset, window)
    y = pd.to_numeric(dataset.roster[outcome], errors="coerce").to_numpy(dtype=float)
    counts = index.count_matrix(grid)
    return correlate_columns(grid, counts, y)
