"""
Loading and validation of the five LMS export files, plus term-calendar
arithmetic (instructional days, weeks, windows).

All tables are held as pandas DataFrames. Timestamps are normalized to UTC
at ingest; calendar dates are interpreted in a campus time zone (UTC unless
configured otherwise).
"""

from __future__ import annotations

import datetime as dt
import logging
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np
import pandas as pd

log = logging.getLogger(__name__)

DAY_NS = 86_400 * 10**9

LOGIN_COLUMNS = ["student_id", "timestamp"]
GRADE_COLUMNS = [
    "student_id",
    "course_id",
    "grade_item_id",
    "awarded_at",
    "points_numerator",
    "points_denominator",
    "grade_value",
]
ENROLLMENT_COLUMNS = ["student_id", "course_id", "term_id", "credit_hours"]
ROSTER_COLUMNS = ["student_id", "term_id", "semester_gpa", "overall_gpa", "discontinued"]
TERM_COLUMNS = ["term_id", "start_date", "end_date", "breaks"]

FILE_NAMES = {
    "logins": "logins.csv",
    "grades": "grades.csv",
    "enrollments": "enrollments.csv",
    "roster": "roster.csv",
    "terms": "terms.csv",
}

OUTCOMES = ("semester_gpa", "overall_gpa", "discontinued")

# window bound in weeks; None means the full term
WINDOWS = (4, 8, 12, None)


class SchemaError(ValueError):
    """A file is missing one of its required header columns."""


class DataValidationError(ValueError):
    """Too many rows of a file failed validation."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class LoginEvent(NamedTuple):
    student_id: str
    timestamp: pd.Timestamp


class GradeRecord(NamedTuple):
    student_id: str
    course_id: str
    grade_item_id: str
    awarded_at: pd.Timestamp
    points_numerator: float | None = None
    points_denominator: float | None = None
    grade_value: str | None = None
    source_row: int | None = None


def parse_window(window) -> int | None:
    """Normalize a window spec (4, 8, 12, "full", None) to a week bound or None."""
    if window is None:
        return None
    if isinstance(window, str):
        w = window.strip().lower()
        if w in ("full", "all", ""):
            return None
        window = int(w)
    window = int(window)
    if window <= 0:
        raise ValueError(f"window must be positive, got {window}")
    return window


def window_label(window) -> str:
    w = parse_window(window)
    return "full" if w is None else str(w)


@dataclass(frozen=True)
class TermCalendar:
    term_id: str
    start_date: dt.date
    end_date: dt.date
    breaks: tuple[tuple[dt.date, dt.date], ...] = ()

    def __post_init__(self):
        if self.start_date > self.end_date:
            raise ValueError(f"term {self.term_id}: start {self.start_date} after end {self.end_date}")
        prev_end = None
        for lo, hi in self.breaks:
            if lo > hi:
                raise ValueError(f"term {self.term_id}: break {lo}..{hi} is reversed")
            if lo < self.start_date or hi > self.end_date:
                raise ValueError(f"term {self.term_id}: break {lo}..{hi} outside term")
            if prev_end is not None and lo <= prev_end:
                raise ValueError(f"term {self.term_id}: breaks overlap or are unordered")
            prev_end = hi

    @property
    def n_days(self) -> int:
        return (self.end_date - self.start_date).days + 1

    @cached_property
    def day_lookup(self) -> np.ndarray:
        """Instructional day index for each calendar day of the term."""
        instructional = np.ones(self.n_days, dtype=bool)
        for lo, hi in self.breaks:
            instructional[(lo - self.start_date).days:(hi - self.start_date).days + 1] = False
        # break days inherit the index of the previous instructional day
        return np.maximum(np.cumsum(instructional) - 1, 0)

    @property
    def start_epoch_day(self) -> int:
        return (self.start_date - dt.date(1970, 1, 1)).days

    def weeks_from_days(self, epoch_days: np.ndarray) -> np.ndarray:
        """Week number (1-based) for local epoch days; 0 marks out-of-term."""
        offset = np.asarray(epoch_days, dtype=np.int64) - self.start_epoch_day
        inside = (offset >= 0) & (offset < self.n_days)
        weeks = np.zeros(offset.shape, dtype=np.int64)
        weeks[inside] = self.day_lookup[offset[inside]] // 7 + 1
        return weeks

    def weeks(self, timestamps, tz: str = "UTC") -> np.ndarray:
        return self.weeks_from_days(local_epoch_days(timestamps, tz))

    def contains_days(self, epoch_days: np.ndarray) -> np.ndarray:
        offset = np.asarray(epoch_days, dtype=np.int64) - self.start_epoch_day
        return (offset >= 0) & (offset < self.n_days)

    def start_instant_ns(self, tz: str = "UTC") -> int:
        ts = pd.Timestamp(self.start_date)
        if tz != "UTC":
            ts = ts.tz_localize(tz).tz_convert("UTC")
        else:
            ts = ts.tz_localize("UTC")
        return int(ts.value)

    def end_instant_ns(self, tz: str = "UTC") -> int:
        """First instant after the term's last day."""
        ts = pd.Timestamp(self.end_date + dt.timedelta(days=1))
        ts = ts.tz_localize(tz).tz_convert("UTC") if tz != "UTC" else ts.tz_localize("UTC")
        return int(ts.value)

    def format_breaks(self) -> str:
        return ";".join(f"{lo.isoformat()}..{hi.isoformat()}" for lo, hi in self.breaks)


def parse_breaks(text: str) -> tuple[tuple[dt.date, dt.date], ...]:
    text = (text or "").strip()
    if not text:
        return ()
    out = []
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        lo, sep, hi = part.partition("..")
        if not sep:
            raise ValueError(f"break range {part!r} is not of the form YYYY-MM-DD..YYYY-MM-DD")
        out.append((dt.date.fromisoformat(lo.strip()), dt.date.fromisoformat(hi.strip())))
    return tuple(out)


def local_epoch_days(timestamps, tz: str = "UTC") -> np.ndarray:
    """Days since 1970-01-01 in the campus time zone for UTC instants."""
    ns = _as_utc_ns(timestamps)
    if tz == "UTC":
        return np.floor_divide(ns, DAY_NS)
    local = pd.DatetimeIndex(ns.astype("datetime64[ns]"), tz="UTC").tz_convert(tz).tz_localize(None)
    return np.floor_divide(local.asi8, DAY_NS)


def _as_utc_ns(timestamps) -> np.ndarray:
    if isinstance(timestamps, np.ndarray) and timestamps.dtype == np.int64:
        return timestamps
    if isinstance(timestamps, pd.Series):
        timestamps = timestamps.array
    idx = pd.DatetimeIndex(pd.to_datetime(timestamps, utc=True)) if len(timestamps) else pd.DatetimeIndex([], tz="UTC")
    return idx.asi8


def _to_date(value) -> dt.date:
    if isinstance(value, dt.datetime):
        return value.date()
    if isinstance(value, dt.date):
        return value
    return pd.Timestamp(value).date()


def instructional_day_index(calendar: TermCalendar, date) -> int | None:
    """Index of ``date`` in the term's instructional days; None when out of term."""
    d = _to_date(date)
    if d < calendar.start_date or d > calendar.end_date:
        return None
    return int(calendar.day_lookup[(d - calendar.start_date).days])


def week_of(calendar: TermCalendar, instant, tz: str = "UTC") -> int | None:
    w = int(calendar.weeks([instant], tz)[0])
    return w or None


def window_filter(instants: Sequence, calendar: TermCalendar, window, tz: str = "UTC") -> list:
    """Keep in-term instants falling in the first ``window`` weeks, in input order."""
    bound = parse_window(window)
    if len(instants) == 0:
        return []
    weeks = calendar.weeks(list(instants), tz)
    keep = weeks > 0
    if bound is not None:
        keep &= weeks <= bound
    return [t for t, k in zip(instants, keep) if k]


@dataclass
class FileReport:
    rows: int = 0
    loaded: int = 0
    skipped: int = 0
    skip_reasons: dict[str, int] = field(default_factory=dict)
    missing: dict[str, int] = field(default_factory=dict)

    @property
    def skip_fraction(self) -> float:
        return self.skipped / self.rows if self.rows else 0.0

    def skip(self, reason: str, mask: np.ndarray) -> None:
        n = int(np.count_nonzero(mask))
        if n:
            self.skip_reasons[reason] = self.skip_reasons.get(reason, 0) + n


@dataclass
class ValidationReport:
    files: dict[str, FileReport] = field(default_factory=dict)
    orphan_logins: int = 0
    orphan_grades: int = 0
    max_skip_fraction: float = 0.01

    @property
    def total_skipped(self) -> int:
        return sum(f.skipped for f in self.files.values())

    def to_dict(self) -> dict:
        return {
            "max_skip_fraction": self.max_skip_fraction,
            "orphan_logins": self.orphan_logins,
            "orphan_grades": self.orphan_grades,
            "total_skipped": self.total_skipped,
            "files": {
                name: {
                    "rows": f.rows,
                    "loaded": f.loaded,
                    "skipped": f.skipped,
                    "skip_fraction": f.skip_fraction,
                    "skip_reasons": dict(sorted(f.skip_reasons.items())),
                    "missing": dict(f.missing),
                }
                for name, f in self.files.items()
            },
        }


@dataclass(frozen=True)
class Dataset:
    """Validated LMS data. Treat as read-only once built."""

    logins: pd.DataFrame
    grades: pd.DataFrame
    enrollments: pd.DataFrame
    roster: pd.DataFrame
    calendars: Mapping[str, TermCalendar]
    report: ValidationReport = field(default_factory=ValidationReport)
    tz: str = "UTC"

    @property
    def extra_columns(self) -> list[str]:
        return [c for c in self.roster.columns if c not in ROSTER_COLUMNS]

    @property
    def roster_keys(self) -> pd.DataFrame:
        return self.roster[["student_id", "term_id"]]

    def login_ns(self) -> np.ndarray:
        return self.logins["timestamp"].array.asi8

    @classmethod
    def from_records(
        cls,
        *,
        logins: Iterable = (),
        grades: Iterable = (),
        enrollments: Iterable = (),
        roster: Iterable = (),
        calendars: Iterable[TermCalendar] = (),
        tz: str = "UTC",
    ) -> "Dataset":
        """Build a dataset from in-memory rows (tuples or dicts); mostly for fixtures."""
        login_df = pd.DataFrame(list(logins), columns=LOGIN_COLUMNS)
        grade_rows = [tuple(g) + (None,) * (8 - len(g)) for g in grades]
        grade_df = pd.DataFrame(grade_rows, columns=GRADE_COLUMNS + ["source_row"])
        if grade_df["source_row"].isna().any():
            # input order stands in for the file row
            grade_df["source_row"] = np.arange(len(grade_df))
        enroll_df = pd.DataFrame(list(enrollments), columns=ENROLLMENT_COLUMNS)
        roster_rows = list(roster)
        if roster_rows and isinstance(roster_rows[0], Mapping):
            roster_df = pd.DataFrame(roster_rows)
        else:
            roster_df = pd.DataFrame(roster_rows, columns=ROSTER_COLUMNS)
        for c in ROSTER_COLUMNS:
            if c not in roster_df:
                roster_df[c] = np.nan
        return build_dataset(login_df, grade_df, enroll_df, roster_df, {c.term_id: c for c in calendars}, tz=tz)


def build_dataset(logins, grades, enrollments, roster, calendars, tz="UTC", report=None) -> Dataset:
    """Normalize already-parsed frames into a Dataset (no row skipping)."""
    logins = logins.copy()
    logins["student_id"] = logins["student_id"].astype(str).astype("category")
    logins["timestamp"] = pd.to_datetime(logins["timestamp"], utc=True)
    logins = logins.reset_index(drop=True)

    grades = grades.copy()
    for c in ("student_id", "course_id", "grade_item_id"):
        grades[c] = grades[c].astype(str)
    grades["awarded_at"] = pd.to_datetime(grades["awarded_at"], utc=True)
    for c in ("points_numerator", "points_denominator"):
        grades[c] = pd.to_numeric(grades[c], errors="coerce").astype(float)
    grades["grade_value"] = grades["grade_value"].astype(object).where(grades["grade_value"].notna(), None)
    grades["source_row"] = grades["source_row"].astype(np.int64)
    grades = grades.reset_index(drop=True)

    enrollments = enrollments.copy()
    for c in ("student_id", "course_id", "term_id"):
        enrollments[c] = enrollments[c].astype(str)
    enrollments["credit_hours"] = pd.to_numeric(enrollments["credit_hours"]).astype(float)
    enrollments = enrollments.reset_index(drop=True)

    roster = roster.copy()
    roster["student_id"] = roster["student_id"].astype(str)
    roster["term_id"] = roster["term_id"].astype(str)
    for c in OUTCOMES:
        roster[c] = pd.to_numeric(roster[c], errors="coerce").astype(float)
    roster = roster.reset_index(drop=True)

    report = report or ValidationReport()
    known = set(roster["student_id"])
    report.orphan_logins = int((~logins["student_id"].astype(str).isin(known)).sum()) if len(logins) else 0
    report.orphan_grades = int((~grades["student_id"].isin(known)).sum()) if len(grades) else 0
    return Dataset(logins, grades, enrollments, roster, dict(calendars), report, tz)


# --- CSV loading -----------------------------------------------------------


def _read(path: Path, required: list[str], name: str) -> pd.DataFrame:
    df = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    missing = [c for c in required if c not in df.columns]
    if missing:
        raise SchemaError(f"{path}: missing column(s) {', '.join(missing)} in {name} header")
    return df


def _blank(s: pd.Series) -> np.ndarray:
    return (s.str.strip() == "").to_numpy()


def _count_missing(df: pd.DataFrame, report: FileReport) -> None:
    for c in df.columns:
        report.missing[c] = int(_blank(df[c]).sum()) if len(df) else 0


def _parse_instants(s: pd.Series) -> pd.Series:
    parsed = pd.to_datetime(s.str.strip(), utc=True, errors="coerce", format="ISO8601")
    return parsed


def _parse_reals(s: pd.Series) -> tuple[np.ndarray, np.ndarray]:
    """Parse optional non-negative reals; returns (values, bad) where bad marks garbage."""
    blank = _blank(s)
    vals = pd.to_numeric(s.str.strip().where(~blank, None), errors="coerce").to_numpy(dtype=float)
    bad = (~blank & ~np.isfinite(vals)) | (np.isfinite(vals) & (vals < 0))
    vals[blank] = np.nan
    return vals, bad


def _finish(df: pd.DataFrame, bad: np.ndarray, report: FileReport) -> pd.DataFrame:
    report.rows = len(df)
    report.skipped = int(bad.sum())
    report.loaded = report.rows - report.skipped
    return df.loc[~bad]


def load_logins(path, report: FileReport) -> pd.DataFrame:
    df = _read(Path(path), LOGIN_COLUMNS, "logins")
    _count_missing(df, report)
    ts = _parse_instants(df["timestamp"])
    bad_id = _blank(df["student_id"])
    bad_ts = ts.isna().to_numpy()
    report.skip("empty student_id", bad_id)
    report.skip("unparseable timestamp", bad_ts & ~bad_id)
    out = pd.DataFrame({"student_id": df["student_id"].str.strip(), "timestamp": ts})
    return _finish(out, bad_id | bad_ts, report)


def load_grades(path, report: FileReport) -> pd.DataFrame:
    df = _read(Path(path), GRADE_COLUMNS, "grades")
    _count_missing(df, report)
    ts = _parse_instants(df["awarded_at"])
    num, bad_num = _parse_reals(df["points_numerator"])
    den, bad_den = _parse_reals(df["points_denominator"])
    value_blank = _blank(df["grade_value"])
    keys_blank = _blank(df["student_id"]) | _blank(df["course_id"]) | _blank(df["grade_item_id"])
    no_payload = np.isnan(num) & np.isnan(den) & value_blank
    bad_ts = ts.isna().to_numpy()
    report.skip("empty key", keys_blank)
    report.skip("unparseable awarded_at", bad_ts)
    report.skip("bad points", bad_num | bad_den)
    report.skip("no numerator, denominator or grade value", no_payload)
    bad = keys_blank | bad_ts | bad_num | bad_den | no_payload
    out = pd.DataFrame(
        {
            "student_id": df["student_id"].str.strip(),
            "course_id": df["course_id"].str.strip(),
            "grade_item_id": df["grade_item_id"].str.strip(),
            "awarded_at": ts,
            "points_numerator": num,
            "points_denominator": den,
            "grade_value": df["grade_value"].where(~value_blank, None),
            "source_row": np.arange(len(df), dtype=np.int64),
        }
    )
    return _finish(out, bad, report)


def load_enrollments(path, report: FileReport) -> pd.DataFrame:
    df = _read(Path(path), ENROLLMENT_COLUMNS, "enrollments")
    _count_missing(df, report)
    for c in ("student_id", "course_id", "term_id"):
        df[c] = df[c].str.strip()
    hours, bad_hours = _parse_reals(df["credit_hours"])
    bad_hours |= np.isnan(hours)
    keys_blank = _blank(df["student_id"]) | _blank(df["course_id"]) | _blank(df["term_id"])
    dup = df.duplicated(["student_id", "course_id", "term_id"], keep="first").to_numpy()
    report.skip("empty key", keys_blank)
    report.skip("bad credit_hours", bad_hours)
    report.skip("duplicate enrollment", dup)
    out = df[ENROLLMENT_COLUMNS].copy()
    out["credit_hours"] = hours
    return _finish(out, keys_blank | bad_hours | dup, report)


def load_roster(path, report: FileReport) -> pd.DataFrame:
    df = _read(Path(path), ROSTER_COLUMNS, "roster")
    _count_missing(df, report)
    df["student_id"] = df["student_id"].str.strip()
    df["term_id"] = df["term_id"].str.strip()
    bad = _blank(df["student_id"]) | _blank(df["term_id"])
    report.skip("empty key", bad)
    out = df[["student_id", "term_id"]].copy()
    for c in ("semester_gpa", "overall_gpa"):
        vals, garbage = _parse_reals(df[c])
        garbage |= vals > 4
        report.skip(f"bad {c}", garbage)
        bad |= garbage
        out[c] = vals
    disc, garbage = _parse_reals(df["discontinued"])
    garbage |= np.isfinite(disc) & ~np.isin(disc, (0.0, 1.0))
    report.skip("bad discontinued", garbage)
    bad |= garbage
    out["discontinued"] = disc
    dup = df.duplicated(["student_id", "term_id"], keep="first").to_numpy()
    report.skip("duplicate roster row", dup)
    bad |= dup
    for c in df.columns:
        if c in ROSTER_COLUMNS:
            continue
        blank = _blank(df[c])
        numeric = pd.to_numeric(df[c].where(~blank, None), errors="coerce")
        if bool(numeric[~blank].notna().all()):
            out[c] = numeric.to_numpy(dtype=float)
        else:
            out[c] = df[c].where(~blank, None)
    return _finish(out, bad, report)


def load_terms(path, report: FileReport) -> dict[str, TermCalendar]:
    df = _read(Path(path), TERM_COLUMNS, "terms")
    _count_missing(df, report)
    calendars: dict[str, TermCalendar] = {}
    bad = np.zeros(len(df), dtype=bool)
    for i, row in enumerate(df.itertuples(index=False)):
        try:
            cal = TermCalendar(
                row.term_id.strip(),
                dt.date.fromisoformat(row.start_date.strip()),
                dt.date.fromisoformat(row.end_date.strip()),
                parse_breaks(row.breaks),
            )
            if not cal.term_id or cal.term_id in calendars:
                raise ValueError("empty or duplicate term_id")
        except ValueError:
            bad[i] = True
            continue
        calendars[cal.term_id] = cal
    report.skip("bad calendar", bad)
    _finish(df, bad, report)
    return calendars


def resolve_paths(paths) -> dict[str, Path]:
    """Accept a directory holding the five standard files or an explicit mapping."""
    if isinstance(paths, (str, Path)):
        root = Path(paths)
        return {k: root / v for k, v in FILE_NAMES.items()}
    resolved = {k: Path(v) for k, v in dict(paths).items()}
    missing = set(FILE_NAMES) - set(resolved)
    if missing:
        raise ValueError(f"missing input path(s): {', '.join(sorted(missing))}")
    return resolved


def load_dataset(paths, *, max_skip_fraction: float = 0.01, tz: str = "UTC") -> Dataset:
    """Parse and validate the five CSV files.

    :param paths: directory containing logins.csv, grades.csv, enrollments.csv,
        roster.csv and terms.csv, or a mapping from those stems to file paths.
    :param max_skip_fraction: per-file fraction of unparseable rows above which
        loading fails with :class:`DataValidationError`.
    :param tz: campus time zone used to interpret calendar dates.
    """
    files = resolve_paths(paths)
    for name, p in files.items():
        if not p.exists():
            raise FileNotFoundError(f"{name} file not found: {p}")
    report = ValidationReport(max_skip_fraction=max_skip_fraction)
    reports = {name: FileReport() for name in FILE_NAMES}
    report.files = reports

    logins = load_logins(files["logins"], reports["logins"])
    grades = load_grades(files["grades"], reports["grades"])
    enrollments = load_enrollments(files["enrollments"], reports["enrollments"])
    roster = load_roster(files["roster"], reports["roster"])
    calendars = load_terms(files["terms"], reports["terms"])

    no_cal = ~enrollments["term_id"].isin(calendars).to_numpy()
    if no_cal.any():
        r = reports["enrollments"]
        r.skip("term without calendar", no_cal)
        r.skipped += int(no_cal.sum())
        r.loaded -= int(no_cal.sum())
        enrollments = enrollments.loc[~no_cal]

    for name, r in reports.items():
        if r.skip_fraction > max_skip_fraction:
            raise DataValidationError(
                f"{files[name]}: {r.skipped} of {r.rows} rows unparseable "
                f"({r.skip_fraction:.1%} > {max_skip_fraction:.1%})",
                report,
            )
    for name, r in reports.items():
        if r.skipped:
            log.warning("%s: skipped %d of %d rows %s", name, r.skipped, r.rows, r.skip_reasons)

    dataset = build_dataset(logins, grades, enrollments, roster, calendars, tz=tz, report=report)
    if report.orphan_logins or report.orphan_grades:
        log.info("orphans: %d logins, %d grades", report.orphan_logins, report.orphan_grades)
    return dataset


def assign_terms(dataset: Dataset, timestamps_ns: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Map instants to (term position, week); term position -1 when in no term.

    Term positions index ``list(dataset.calendars)``.
    """
    days = local_epoch_days(timestamps_ns, dataset.tz)
    term_pos = np.full(len(days), -1, dtype=np.int64)
    weeks = np.zeros(len(days), dtype=np.int64)
    for pos, cal in enumerate(dataset.calendars.values()):
        inside = cal.contains_days(days) & (term_pos < 0)
        if inside.any():
            term_pos[inside] = pos
            weeks[inside] = cal.weeks_from_days(days[inside])
    return term_pos, weeks


def in_window(weeks: np.ndarray, window) -> np.ndarray:
    bound = parse_window(window)
    keep = weeks > 0
    if bound is not None:
        keep &= weeks <= bound
    return keep


def full_time_students(dataset: Dataset, threshold: float = 12.0) -> pd.DataFrame:
    """(student_id, term_id) pairs whose enrolled credit hours reach ``threshold``."""
    hours = dataset.enrollments.groupby(["student_id", "term_id"], sort=True)["credit_hours"].sum()
    return hours[hours >= threshold].reset_index()[["student_id", "term_id"]]
