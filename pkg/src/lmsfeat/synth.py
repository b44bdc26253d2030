"""
Seeded synthetic LMS data with planted, recoverable structure.

Each student has a latent ability a ~ N(0, 1) that drives:

* study sessions, a gamma renewal process with mean spacing
  ``session_spacing_hours / (1 + ability_effect_logins * m * a)`` where m is
  the student's cohort multiplier; each session emits 1 + Poisson(b) logins
  inside ``burst_width_hours``, and ability-independent background logins
  are sprinkled on top. Burst size b and background rate vary per student
  (log-normal habits), so raw counts are noisy while gap-filtered counts
  track session frequency;
* grade quality, numerator = denominator * sigmoid(base + effect * a + noise),
  where noise has a per-item part and a per-student-term offset so that
  grades are an imperfect proxy for ability;
* semester GPA and discontinuance risk.

Every random draw comes from a per-student (or per-course) seed derived from
the master seed, so output bytes do not depend on iteration details.
"""

from __future__ import annotations

import datetime as dt
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from .ingest import (
    ENROLLMENT_COLUMNS,
    FILE_NAMES,
    GRADE_COLUMNS,
    LOGIN_COLUMNS,
    Dataset,
    TermCalendar,
    assign_terms,
    build_dataset,
    parse_breaks,
)

LETTERS = ((97, "A+"), (93, "A"), (90, "A-"), (87, "B+"), (83, "B"), (80, "B-"), (77, "C+"), (70, "C"), (60, "D"), (0, "F"))
DENOMINATORS = np.array([10.0, 20.0, 25.0, 50.0, 100.0])
CREDIT_HOURS = np.array([3.0, 3.0, 3.0, 3.0, 4.0, 1.0])


@dataclass(frozen=True)
class TermRegime:
    """One term's calendar plus its usage knobs."""

    term_id: str
    start: dt.date
    end: dt.date
    breaks: tuple[tuple[dt.date, dt.date], ...] = ()
    login_multiplier: float = 1.0
    grade_multiplier: float = 1.0
    early_fraction: float = 0.5
    grades_per_student: float | None = None

    @property
    def calendar(self) -> TermCalendar:
        return TermCalendar(self.term_id, self.start, self.end, tuple(self.breaks))


@dataclass(frozen=True)
class Cohort:
    name: str
    share: float
    login_multiplier: float = 1.0


def _d(s: str) -> dt.date:
    return dt.date.fromisoformat(s)


DEFAULT_TERMS = (
    TermRegime("2023FA", _d("2023-08-28"), _d("2023-12-15"), ((_d("2023-11-20"), _d("2023-11-24")),)),
    TermRegime("2024SP", _d("2024-01-16"), _d("2024-05-10"), ((_d("2024-03-11"), _d("2024-03-15")),)),
)

DEFAULT_COHORTS = (
    Cohort("PSYC", 0.25, 1.4),
    Cohort("BIOL", 0.20, 1.2),
    Cohort("BUSI", 0.20, 1.0),
    Cohort("KINE", 0.15, 0.9),
    Cohort("NURS", 0.12, 0.8),
    Cohort("DUAL", 0.08, 0.5),
)


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 42
    n_students: int = 5000
    terms: tuple[TermRegime, ...] = DEFAULT_TERMS
    cohorts: tuple[Cohort, ...] = DEFAULT_COHORTS

    session_spacing_hours: float = 24.0
    session_shape: float = 16.0
    burst_width_hours: float = 2.0
    burst_size_mean: float = 1.5
    background_logins_per_day: float = 1.0
    habit_sigma: float = 1.0

    ability_effect_logins: float = 0.25
    ability_effect_grades: float = 0.8
    ability_effect_gpa: float = 0.6
    ability_effect_discontinue: float = 0.8
    discontinue_intercept: float = -2.2
    gpa_noise: float = 0.5
    grade_base: float = 1.2
    grade_noise: float = 1.5
    grade_offset_noise: float = 0.6

    courses_per_student: float = 4.5
    grade_items_per_course: float = 10.0
    class_size: int = 30
    completion_rate: float = 0.95
    update_rate: float = 0.1
    letter_fraction: float = 0.13
    missing_numerator: float = 0.01
    missing_denominator: float = 0.006
    missing_value: float = 0.001

    def validate(self) -> None:
        if self.n_students < 0:
            raise ValueError("n_students must be >= 0")
        if not self.terms:
            raise ValueError("at least one term is required")
        if len({t.term_id for t in self.terms}) != len(self.terms):
            raise ValueError("term ids must be unique")
        for t in self.terms:
            t.calendar  # validates dates and breaks
            if t.login_multiplier <= 0 or t.grade_multiplier <= 0:
                raise ValueError(f"term {t.term_id}: multipliers must be positive")
            if not 0 <= t.early_fraction <= 1:
                raise ValueError(f"term {t.term_id}: early_fraction must be in [0, 1]")
            if t.grades_per_student is not None and t.grades_per_student <= 0:
                raise ValueError(f"term {t.term_id}: grades_per_student must be positive")
        if self.session_spacing_hours <= 2 * self.burst_width_hours:
            raise ValueError("session_spacing_hours must exceed twice burst_width_hours")
        for name in (
            "session_spacing_hours",
            "session_shape",
            "burst_width_hours",
            "burst_size_mean",
            "background_logins_per_day",
            "courses_per_student",
            "grade_items_per_course",
            "class_size",
        ):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.courses_per_student < 1:
            raise ValueError("courses_per_student must be >= 1")
        for name in ("habit_sigma", "gpa_noise", "grade_noise", "grade_offset_noise"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        for name in (
            "completion_rate",
            "update_rate",
            "letter_fraction",
            "missing_numerator",
            "missing_denominator",
            "missing_value",
        ):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must be a probability")
        if self.cohorts:
            if any(c.share < 0 for c in self.cohorts):
                raise ValueError("cohort shares must be non-negative")
            if not math.isclose(sum(c.share for c in self.cohorts), 1.0, abs_tol=1e-9):
                raise ValueError("cohort shares must sum to 1")

    def items_per_course(self, term: TermRegime) -> float:
        if term.grades_per_student is not None:
            per_item = self.courses_per_student * self.completion_rate * (1 + self.update_rate)
            return term.grades_per_student / per_item
        return self.grade_items_per_course * term.grade_multiplier

    def to_dict(self) -> dict:
        d = asdict(self)
        d["terms"] = [
            {
                **asdict(t),
                "start": t.start.isoformat(),
                "end": t.end.isoformat(),
                "breaks": [[lo.isoformat(), hi.isoformat()] for lo, hi in t.breaks],
            }
            for t in self.terms
        ]
        d["cohorts"] = [asdict(c) for c in self.cohorts]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        d = dict(d)
        if "terms" in d:
            d["terms"] = tuple(
                TermRegime(
                    **{
                        **t,
                        "start": _d(t["start"]),
                        "end": _d(t["end"]),
                        "breaks": tuple((_d(lo), _d(hi)) for lo, hi in t.get("breaks", ())),
                    }
                )
                for t in d["terms"]
            )
        if "cohorts" in d:
            d["cohorts"] = tuple(Cohort(**c) for c in d["cohorts"])
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown synth config key(s): {', '.join(sorted(unknown))}")
        return cls(**d)


# --- planted truth -------------------------------------------------------------


def _gauss_hermite_mean(fn, deg: int = 80) -> float:
    """E[fn(a)] for a ~ N(0, 1)."""
    x, w = np.polynomial.hermite_e.hermegauss(deg)
    return float((w * fn(x)).sum() / np.sqrt(2 * np.pi))


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def expected_logins_per_student(config: SynthConfig, term: TermRegime) -> float:
    hours = term.calendar.n_days * 24.0
    sessions = hours / config.session_spacing_hours
    per_term = sessions * (1 + config.burst_size_mean) + config.background_logins_per_day * term.calendar.n_days
    return per_term * term.login_multiplier


def expected_grades_per_student(config: SynthConfig, term: TermRegime) -> float:
    return (
        config.courses_per_student
        * config.items_per_course(term)
        * config.completion_rate
        * (1 + config.update_rate)
    )


def expected_discontinue_rate(config: SynthConfig) -> float:
    return _gauss_hermite_mean(
        lambda a: _sigmoid(-config.ability_effect_discontinue * a + config.discontinue_intercept)
    )


@dataclass
class PlantedTruth:
    peak_gap_window: tuple[float, float]
    correlation_signs: dict[str, dict[str, int]]
    cohort_order: list[str]
    window_trend: str
    logins_per_student: dict[str, float]
    grades_per_student: dict[str, float]
    discontinue_rate: float

    def to_dict(self) -> dict:
        d = asdict(self)
        d["peak_gap_window"] = list(self.peak_gap_window)
        return d


def planted_truth(config: SynthConfig) -> PlantedTruth:
    """What the generated data should show, derived from the config alone."""
    s = config.session_spacing_hours
    sign = lambda v: int(np.sign(v))
    gpa_sign = sign(config.ability_effect_gpa)
    disc_sign = -sign(config.ability_effect_discontinue)
    login_sign = sign(config.ability_effect_logins)
    grade_sign = sign(config.ability_effect_grades)
    signs = {
        "periodic_logins": {"semester_gpa": login_sign * gpa_sign, "discontinued": login_sign * disc_sign},
        "grade_value": {"semester_gpa": grade_sign * gpa_sign, "discontinued": grade_sign * disc_sign},
        "grade_ratio": {"semester_gpa": grade_sign * gpa_sign, "discontinued": grade_sign * disc_sign},
    }
    order = [c.name for c in sorted(config.cohorts, key=lambda c: (-c.login_multiplier, c.name))]
    return PlantedTruth(
        peak_gap_window=(0.5 * s, 1.25 * s),
        correlation_signs=signs,
        cohort_order=order,
        window_trend="non-increasing test MSE from 4 to 8 to 12 weeks to full term",
        logins_per_student={t.term_id: expected_logins_per_student(config, t) for t in config.terms},
        grades_per_student={t.term_id: expected_grades_per_student(config, t) for t in config.terms},
        discontinue_rate=expected_discontinue_rate(config),
    )


# --- generation ---------------------------------------------------------------


def _letter(pct: np.ndarray) -> np.ndarray:
    out = np.empty(pct.shape, dtype=object)
    out[:] = "F"
    for cut, letter in reversed(LETTERS):
        out[pct >= cut] = letter
    return out


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def _session_logins(rng, spacing, shape, hours, burst_width, burst_mean, background_rate_h):
    """Login offsets (hours from term start) for one student-term, sorted."""
    n_draw = int(hours / spacing * 1.5) + 8
    gaps = rng.gamma(shape, spacing / shape, n_draw)
    starts = rng.uniform(0.0, spacing) + np.concatenate(([0.0], np.cumsum(gaps[:-1])))
    while starts[-1] < hours:
        more = rng.gamma(shape, spacing / shape, n_draw)
        starts = np.concatenate((starts, starts[-1] + np.cumsum(more)))
    starts = starts[starts < hours]
    sizes = 1 + rng.poisson(burst_mean, starts.size)
    logins = np.repeat(starts, sizes) + rng.uniform(0.0, burst_width, int(sizes.sum()))
    background = rng.uniform(0.0, hours, rng.poisson(background_rate_h * hours))
    out = np.concatenate((logins, background))
    return np.sort(out[out < hours])


@dataclass
class _Student:
    ability: float
    cohort: str
    login_mult: float
    burst_mean: float
    background_rate: float
    base_hours: int


def _students(config: SynthConfig) -> list[_Student]:
    names = [c.name for c in config.cohorts] or ["UNDECLARED"]
    shares = np.array([c.share for c in config.cohorts]) if config.cohorts else np.array([1.0])
    mults = [c.login_multiplier for c in config.cohorts] or [1.0]
    cum = np.cumsum(shares)
    sig = config.habit_sigma
    out = []
    for i in range(config.n_students):
        rng = _rng(config.seed, i)
        a = rng.standard_normal()
        k = min(int(np.searchsorted(cum, rng.uniform(0, cum[-1]), side="right")), len(names) - 1)
        z1, z2 = rng.standard_normal(2)
        out.append(
            _Student(
                ability=float(a),
                cohort=names[k],
                login_mult=mults[k],
                burst_mean=config.burst_size_mean * math.exp(sig * z1 - sig**2 / 2),
                background_rate=config.background_logins_per_day / 24.0 * math.exp(sig * z2 - sig**2 / 2),
                base_hours=int(rng.integers(0, 100)),
            )
        )
    return out


def _courses(config: SynthConfig, t_idx: int, term: TermRegime):
    """Course pool for a term: ids, credit hours, item schedules."""
    rng = _rng(config.seed, 0xFFFFFFF, t_idx)
    cal = term.calendar
    n_courses = int(math.ceil(config.n_students * config.courses_per_student / config.class_size)) + 8
    hours = cal.n_days * 24.0
    # first calendar hour of instructional week 9
    week9 = np.flatnonzero(cal.day_lookup >= 56)
    split_h = float(week9[0] * 24.0) if week9.size else hours
    per_course = config.items_per_course(term)
    courses = []
    for j in range(n_courses):
        n_items = int(per_course) + int(rng.uniform() < per_course - int(per_course))
        early = rng.uniform(size=n_items) < term.early_fraction
        due = np.where(
            early,
            rng.uniform(0.0, split_h, n_items),
            rng.uniform(split_h, hours, n_items) if split_h < hours else rng.uniform(0.0, hours, n_items),
        )
        courses.append(
            {
                "course_id": f"{term.term_id}-C{j:04d}",
                "credits": float(rng.choice(CREDIT_HOURS)),
                "difficulty": float(rng.normal(0.0, 0.3)),
                "due": np.sort(due),
                "denominator": rng.choice(DENOMINATORS, n_items),
            }
        )
    return courses


def _iso(secs: np.ndarray) -> np.ndarray:
    """UTC ISO-8601 strings for integer epoch seconds."""
    return np.char.add(np.datetime_as_string(np.asarray(secs, dtype=np.int64).astype("datetime64[s]"), unit="s"), "Z")


def generate_frames(config: SynthConfig) -> dict[str, pd.DataFrame]:
    """The five ingest tables as DataFrames of strings/numbers, in file order."""
    config.validate()
    students = _students(config)
    login_parts, grade_parts, enroll_parts, roster_rows = [], [], [], []

    for t_idx, term in enumerate(config.terms):
        cal = term.calendar
        hours = cal.n_days * 24.0
        start_s = cal.start_instant_ns("UTC") // 10**9
        courses = _courses(config, t_idx, term)
        n_pool = len(courses)
        t_ids, t_secs = [], []
        g_cols = {k: [] for k in ("student_id", "course_id", "item", "secs", "num", "den", "pct", "letter", "blank")}

        for i, st in enumerate(students):
            rng = _rng(config.seed, i, t_idx + 1)
            sid = f"S{i:06d}"
            a = st.ability

            # logins
            rate = max(1.0 + config.ability_effect_logins * st.login_mult * a, 0.2) * term.login_multiplier
            offsets = _session_logins(
                rng,
                config.session_spacing_hours / rate,
                config.session_shape,
                hours,
                config.burst_width_hours,
                st.burst_mean,
                st.background_rate * term.login_multiplier,
            )
            t_ids.append(np.full(offsets.size, i, dtype=np.int64))
            t_secs.append(start_s + np.floor(offsets * 3600.0).astype(np.int64))

            # enrollments and grades
            n_courses = min(1 + int(rng.poisson(config.courses_per_student - 1)), n_pool)
            picks = np.sort(rng.choice(n_pool, n_courses, replace=False))
            attempted = 0.0
            # per student-term grading luck, unrelated to the outcome
            offset = config.grade_offset_noise * rng.standard_normal()
            for j in picks:
                c = courses[j]
                attempted += c["credits"]
                enroll_parts.append((sid, c["course_id"], term.term_id, c["credits"]))
                n_items = c["due"].size
                done = rng.uniform(size=n_items) < config.completion_rate
                items = np.flatnonzero(done)
                if items.size == 0:
                    continue
                den = c["denominator"][items]
                posted = c["due"][items] + rng.uniform(0.0, 72.0, items.size)
                posted = np.minimum(posted, hours - 1.0 / 3600)
                z = config.grade_base - c["difficulty"] + config.ability_effect_grades * a + offset
                final = np.round(den * _sigmoid(z + config.grade_noise * rng.standard_normal(items.size)) * 2) / 2
                updated = rng.uniform(size=items.size) < config.update_rate
                provisional = np.round(den * _sigmoid(z + config.grade_noise * rng.standard_normal(items.size)) * 2) / 2
                later = np.minimum(posted + rng.uniform(24.0, 21 * 24.0, items.size), hours - 1.0 / 3600)

                item_idx = np.concatenate((items[updated], items))
                secs = np.concatenate((posted[updated], np.where(updated, later, posted)))
                num = np.concatenate((provisional[updated], final))
                dens = np.concatenate((den[updated], den))
                k = item_idx.size
                pct = 100.0 * num / dens
                letter = rng.uniform(size=k) < config.letter_fraction
                miss_v = rng.uniform(size=k) < config.missing_value
                miss_n = rng.uniform(size=k) < config.missing_numerator
                miss_d = rng.uniform(size=k) < config.missing_denominator
                # never blank all three
                miss_v &= ~(miss_n & miss_d)
                g_cols["student_id"].append(np.full(k, sid, dtype=object))
                g_cols["course_id"].append(np.full(k, c["course_id"], dtype=object))
                g_cols["item"].append(item_idx)
                g_cols["secs"].append(start_s + np.floor(secs * 3600.0).astype(np.int64))
                g_cols["num"].append(np.where(miss_n, np.nan, num))
                g_cols["den"].append(np.where(miss_d, np.nan, dens))
                g_cols["pct"].append(pct)
                g_cols["letter"].append(letter)
                g_cols["blank"].append(miss_v)

            # roster
            hours_completed = st.base_hours + 15 * t_idx
            begin = float(np.clip(2.8 + 0.45 * a + 0.45 * rng.standard_normal(), 0, 4))
            midterm = float(np.clip(2.5 + 0.6 * a + 0.7 * rng.standard_normal(), 0, 4))
            semester = float(np.clip(2.5 + config.ability_effect_gpa * a + config.gpa_noise * rng.standard_normal(), 0, 4))
            has_begin = hours_completed > 0
            prior = begin if has_begin else semester
            overall = float(np.clip(0.75 * prior + 0.25 * semester + 0.1 * rng.standard_normal(), 0, 4))
            p_disc = _sigmoid(-config.ability_effect_discontinue * a + config.discontinue_intercept)
            disc = int(rng.uniform() < p_disc)
            midterm_missing = rng.uniform() < 0.1
            roster_rows.append(
                {
                    "student_id": sid,
                    "term_id": term.term_id,
                    "semester_gpa": round(semester, 2),
                    "overall_gpa": round(overall, 2),
                    "discontinued": disc,
                    "begin_gpa": round(begin, 2) if has_begin else np.nan,
                    "midterm_grade": np.nan if midterm_missing else round(midterm, 2),
                    "major": st.cohort,
                    "hours_attempted": int(round(attempted)),
                    "hours_completed": hours_completed,
                }
            )

        ids = np.concatenate(t_ids) if t_ids else np.zeros(0, np.int64)
        secs = np.concatenate(t_secs) if t_secs else np.zeros(0, np.int64)
        order = np.lexsort((ids, secs))
        login_parts.append((ids[order], secs[order]))

        if g_cols["secs"]:
            gsecs = np.concatenate(g_cols["secs"])
            order = np.argsort(gsecs, kind="stable")
            pct = np.concatenate(g_cols["pct"])
            value = np.where(np.concatenate(g_cols["letter"]), _letter(pct), np.char.mod("%.1f", pct)).astype(object)
            value[np.concatenate(g_cols["blank"])] = ""
            grade_parts.append(
                pd.DataFrame(
                    {
                        "student_id": np.concatenate(g_cols["student_id"])[order],
                        "course_id": np.concatenate(g_cols["course_id"])[order],
                        "grade_item_id": np.char.mod("I%03d", np.concatenate(g_cols["item"])[order]),
                        "awarded_at": _iso(gsecs[order]),
                        "points_numerator": np.concatenate(g_cols["num"])[order],
                        "points_denominator": np.concatenate(g_cols["den"])[order],
                        "grade_value": value[order],
                    }
                )
            )

    ids = np.concatenate([p[0] for p in login_parts]) if login_parts else np.zeros(0, np.int64)
    secs = np.concatenate([p[1] for p in login_parts]) if login_parts else np.zeros(0, np.int64)
    logins = pd.DataFrame(
        {"student_id": np.char.mod("S%06d", ids) if ids.size else np.zeros(0, dtype=object), "timestamp": _iso(secs)},
        columns=LOGIN_COLUMNS,
    )
    grades = pd.concat(grade_parts, ignore_index=True) if grade_parts else pd.DataFrame(columns=GRADE_COLUMNS)
    enrollments = pd.DataFrame(enroll_parts, columns=ENROLLMENT_COLUMNS)
    roster = pd.DataFrame(
        roster_rows,
        columns=[
            "student_id",
            "term_id",
            "semester_gpa",
            "overall_gpa",
            "discontinued",
            "begin_gpa",
            "midterm_grade",
            "major",
            "hours_attempted",
            "hours_completed",
        ],
    )
    terms = pd.DataFrame(
        [
            {
                "term_id": t.term_id,
                "start_date": t.start.isoformat(),
                "end_date": t.end.isoformat(),
                "breaks": t.calendar.format_breaks(),
            }
            for t in config.terms
        ]
    )
    return {"logins": logins, "grades": grades, "enrollments": enrollments, "roster": roster, "terms": terms}


def write_frames(frames: dict[str, pd.DataFrame], out_dir) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {}
    for name, df in frames.items():
        p = out / FILE_NAMES[name]
        df.to_csv(p, index=False, lineterminator="\n", float_format="%.10g")
        paths[name] = p
    return paths


def generate(config: SynthConfig, out_dir) -> PlantedTruth:
    """Write the five CSV files plus planted_truth.json into ``out_dir``."""
    frames = generate_frames(config)
    write_frames(frames, out_dir)
    truth = planted_truth(config)
    (Path(out_dir) / "planted_truth.json").write_text(json.dumps(truth.to_dict(), indent=1, sort_keys=True) + "\n")
    return truth


def frames_to_dataset(frames: dict[str, pd.DataFrame], tz: str = "UTC") -> Dataset:
    """Dataset from generated frames, equivalent to writing and loading the CSV files."""
    grades = frames["grades"].copy()
    grades["grade_value"] = grades["grade_value"].where(grades["grade_value"] != "", None)
    grades["source_row"] = np.arange(len(grades), dtype=np.int64)
    calendars = {
        row.term_id: TermCalendar(row.term_id, dt.date.fromisoformat(row.start_date), dt.date.fromisoformat(row.end_date), parse_breaks(row.breaks))
        for row in frames["terms"].itertuples(index=False)
    }
    roster = frames["roster"].copy()
    # numeric roster extras load as floats from CSV
    for c in ("hours_attempted", "hours_completed"):
        roster[c] = roster[c].astype(float)
    return build_dataset(frames["logins"], grades, frames["enrollments"], roster, calendars, tz=tz)


def synthesize(config: SynthConfig, tz: str = "UTC") -> Dataset:
    """Generate straight into memory, skipping the CSV round trip."""
    return frames_to_dataset(generate_frames(config), tz)


# --- audit -------------------------------------------------------------------


def _check(name, term, expected, values, slack=0.0):
    values = np.asarray(values, dtype=float)
    n = values.size
    realized = float(values.mean()) if n else float("nan")
    se = float(values.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    half = 3 * se + slack * abs(expected)
    return {
        "check": name,
        "term": term,
        "expected": expected,
        "realized": realized,
        "low": expected - half,
        "high": expected + half,
        "ok": bool(n and abs(realized - expected) <= half),
    }


def _ratio_check(name, terms, expected, a, b):
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    ma, mb = a.mean(), b.mean()
    ratio = float(mb / ma)
    rel = math.sqrt(a.var(ddof=1) / (a.size * ma**2) + b.var(ddof=1) / (b.size * mb**2))
    half = 3 * ratio * rel
    return {
        "check": name,
        "term": "->".join(terms),
        "expected": expected,
        "realized": ratio,
        "low": expected - half,
        "high": expected + half,
        "ok": bool(abs(ratio - expected) <= half),
    }


def audit(dataset: Dataset, config: SynthConfig) -> dict:
    """Compare realized per-term means and regime trends with the config's expectations.

    Flags failures in the report; never raises for a mismatch.
    """
    checks = []
    roster = dataset.roster
    if roster.empty:
        return {"ok": True, "checks": checks}

    truth = planted_truth(config)
    terms = list(dataset.calendars)
    login_pos, _ = assign_terms(dataset, dataset.login_ns())
    login_codes = dataset.logins["student_id"].cat.codes.to_numpy()
    categories = dataset.logins["student_id"].cat.categories
    grade_pos, grade_weeks = assign_terms(dataset, dataset.grades["awarded_at"].array.asi8)
    grade_students = dataset.grades["student_id"].to_numpy()

    per_term_logins, per_term_grades = {}, {}
    for pos, term in enumerate(terms):
        ids = roster.loc[roster["term_id"] == term, "student_id"].to_numpy()
        codes = pd.Categorical(ids, categories=categories).codes
        counts = np.bincount(login_codes[login_pos == pos], minlength=len(categories) + 1)
        login_counts = np.where(codes >= 0, counts[np.maximum(codes, 0)], 0)
        g_counts = pd.Series(grade_students[grade_pos == pos]).value_counts()
        grade_counts = g_counts.reindex(ids, fill_value=0).to_numpy()
        per_term_logins[term] = login_counts
        per_term_grades[term] = grade_counts
        # the renewal process and the end-of-term clip make the login mean approximate
        checks.append(_check("logins_per_student", term, truth.logins_per_student[term], login_counts, slack=0.03))
        checks.append(_check("grades_per_student", term, truth.grades_per_student[term], grade_counts))

    disc = roster["discontinued"].dropna().to_numpy(dtype=float)
    checks.append(_check("discontinue_rate", "all", truth.discontinue_rate, disc))

    regimes = {t.term_id: t for t in config.terms}
    for t1, t2 in zip(terms, terms[1:]):
        e1 = truth.logins_per_student[t1]
        e2 = truth.logins_per_student[t2]
        checks.append(_ratio_check("login_regime_ratio", (t1, t2), e2 / e1, per_term_logins[t1], per_term_logins[t2]))
        g1 = truth.grades_per_student[t1]
        g2 = truth.grades_per_student[t2]
        checks.append(_ratio_check("grade_regime_ratio", (t1, t2), g2 / g1, per_term_grades[t1], per_term_grades[t2]))

    early = {}
    for pos, term in enumerate(terms):
        m = grade_pos == pos
        early[term] = float(np.mean(grade_weeks[m] <= 8)) if m.any() else float("nan")
    knob_order = sorted(terms, key=lambda t: regimes[t].early_fraction if t in regimes else 0.0)
    realized_order = sorted(terms, key=lambda t: early[t])
    distinct_knobs = len({regimes[t].early_fraction for t in terms if t in regimes}) == len(terms)
    checks.append(
        {
            "check": "early_posting_trend",
            "term": "all",
            "expected": [regimes[t].early_fraction for t in terms if t in regimes],
            "realized": [early[t] for t in terms],
            "ok": bool(not distinct_knobs or knob_order == realized_order),
        }
    )
    return {"ok": all(c["ok"] for c in checks), "checks": checks}
