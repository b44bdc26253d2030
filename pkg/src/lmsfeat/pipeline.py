"""Named features and end-to-end helpers shared by the command line and demos.

Feature names:

* ``raw_logins``, ``periodic_logins`` (min gap from config),
  ``periodic_logins_<h>h``, ``capped_logins``, ``daily_logins``,
  ``halfday_logins``;
* ``grade_<variant>``, e.g. ``grade_value``, ``grade_ratio_course``,
  ``grade_median_credit``;
* any other name is a roster column.

A ``@4``, ``@8``, ``@12`` or ``@full`` suffix picks the window for that
feature. Under the ``combined`` window, each login or grade feature expands
to its four windowed columns.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import pandas as pd

from .grade_features import DEFAULT_LETTER_MAP, GradeVariant, LetterMap, grade_feature_table
from .ingest import Dataset, parse_window
from .login_features import GapParams, build_login_index, login_feature_table
from .models import FeatureMatrix, assemble, split

WINDOW_NAMES = ("4", "8", "12", "full")
_PERIODIC = re.compile(r"^periodic_logins_(\d+(?:\.\d+)?)h$")


@dataclass(frozen=True)
class FeatureSpec:
    """Resolved feature: kind is login, grade or roster."""

    name: str
    kind: str
    window: int | None = None
    gap: GapParams | None = None
    variant: GradeVariant | None = None


LOGIN_NAMES = ("raw_logins", "periodic_logins", "capped_logins", "daily_logins", "halfday_logins")


def feature_kind(name: str) -> str:
    """login, grade or roster, from the name alone."""
    base = name.partition("@")[0]
    if base in LOGIN_NAMES or _PERIODIC.match(base):
        return "login"
    if base.startswith("grade_"):
        return "grade"
    return "roster"


def resolve_feature(name: str, min_gap: float = 11.0, max_gap: float | None = None, window=None) -> FeatureSpec:
    base, sep, suffix = name.partition("@")
    w = parse_window(suffix) if sep else parse_window(window)
    if base == "raw_logins":
        return FeatureSpec(name, "login", w, gap=GapParams(0.0))
    if base == "periodic_logins":
        return FeatureSpec(name, "login", w, gap=GapParams(min_gap))
    m = _PERIODIC.match(base)
    if m:
        return FeatureSpec(name, "login", w, gap=GapParams(float(m.group(1))))
    if base == "capped_logins":
        if max_gap is None:
            raise ValueError("capped_logins needs max_gap")
        return FeatureSpec(name, "login", w, gap=GapParams(min_gap, max_gap))
    if base == "daily_logins":
        return FeatureSpec(name, "login", w, gap=GapParams(period_len=24))
    if base == "halfday_logins":
        return FeatureSpec(name, "login", w, gap=GapParams(period_len=12))
    if base.startswith("grade_"):
        return FeatureSpec(name, "grade", w, variant=GradeVariant.parse(base))
    if sep:
        raise ValueError(f"roster column {base!r} cannot take a window suffix")
    return FeatureSpec(name, "roster")


def expand_features(names, window: str = "full") -> list[str]:
    """Apply the run window: ``combined`` turns each windowless login/grade name into four."""
    out = []
    for name in names:
        if window == "combined" and "@" not in name and feature_kind(name) != "roster":
            out.extend(f"{name}@{w}" for w in WINDOW_NAMES)
        else:
            out.append(name)
    return out


class FeatureBuilder:
    """Builds feature tables for one dataset, caching login indexes per window."""

    def __init__(self, dataset: Dataset, min_gap=11.0, max_gap=None, letter_map: LetterMap = DEFAULT_LETTER_MAP, window="full"):
        self.dataset = dataset
        self.min_gap = min_gap
        self.max_gap = max_gap
        self.letter_map = letter_map
        self.window = None if window == "combined" else window
        self._indexes = {}

    def index(self, window):
        if window not in self._indexes:
            self._indexes[window] = build_login_index(self.dataset, window)
        return self._indexes[window]

    def spec(self, name: str) -> FeatureSpec:
        return resolve_feature(name, self.min_gap, self.max_gap, self.window)

    def table(self, name: str):
        """Feature table (student_id, term_id, value), or the roster column name."""
        spec = self.spec(name)
        if spec.kind == "login":
            return login_feature_table(self.dataset, spec.gap, spec.window, index=self.index(spec.window))
        if spec.kind == "grade":
            return grade_feature_table(self.dataset, spec.variant, self.letter_map, spec.window)
        if spec.name not in self.dataset.roster.columns:
            raise KeyError(f"unknown feature {spec.name!r}: not a login or grade feature and not a roster column")
        return spec.name

    def sources(self, names) -> dict:
        return {name: self.table(name) for name in names}

    def matrix(self, names, outcome: str, task=None) -> FeatureMatrix:
        return assemble(self.dataset, self.sources(names), outcome, task)

    def wide(self, names) -> pd.DataFrame:
        """One row per roster key, one column per feature (unimputed).

        Roster columns keep their values; categorical ones are not encoded here.
        """
        out = self.dataset.roster_keys.reset_index(drop=True).copy()
        for name, src in self.sources(names).items():
            if isinstance(src, str):
                out[name] = self.dataset.roster[src].to_numpy()
            else:
                out[name] = src["value"].to_numpy(dtype=float)
        return out


def train_test(builder: FeatureBuilder, names, outcome, test_fraction=0.2, seed=0, stratify=None, task=None):
    fm = builder.matrix(names, outcome, task)
    return split(fm, test_fraction, seed, None if stratify in (None, "none") else stratify)
