"""Run configuration: defaults, TOML loading and command-line overrides."""

from __future__ import annotations

import dataclasses
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    """Bad configuration value or file (a usage error)."""


@dataclass
class RunConfig:
    """Every setting a command may read, with its default.

    :param input: directory holding the five ingest CSV files
    :param out: output directory; every command writes only here
    :param window: 4, 8, 12, full, or combined (features only)
    :param grid: minimum-gap sweep grid as start:stop:step hours, stop inclusive
    :param min_gap: minimum gap in hours for periodic_logins
    :param max_gap: upper gap cap for capped_logins
    :param grade_variant: default grade feature, e.g. value, ratio_course, median_credit
    :param letter_map: CSV file with header raw,value; built-in map when empty
    :param features: feature names for train, rank, rfe and importance
    :param outcome: roster outcome column
    :param family: gbm or linear
    :param hyper: model hyperparameters (GbmParams fields or penalty)
    :param grid_search: list of hyperparameter sets for the grid runner
    :param test_fraction: held-out share of rows
    :param stratify: none, outcome or term
    :param full_time_threshold: minimum attempted hours for summaries; 0 disables
    :param cohort: major, attempted_hours_bin or completed_hours_bin
    :param cohort_top_k: keep only the k most populous majors
    :param cohort_min_population: cohorts smaller than this are flagged
    :param target_k: features kept by rfe
    :param repeats: shuffles per column for permutation importance
    :param max_skip_fraction: validation fails above this unparseable-row share
    :param tz: institution time zone used for instructional days
    :param synth: SynthConfig overrides for the synth command
    """

    input: str | None = None
    out: str = "lmsfeat-out"
    seed: int = 0
    threads: int = 1
    quiet: bool = False
    window: str = "full"
    grid: str = "0:48:0.5"
    min_gap: float = 11.0
    max_gap: float | None = None
    grade_variant: str = "value"
    letter_map: str | None = None
    features: list[str] = field(default_factory=lambda: ["periodic_logins", "grade_value"])
    outcome: str = "semester_gpa"
    family: str = "gbm"
    hyper: dict = field(default_factory=dict)
    grid_search: list[dict] = field(default_factory=list)
    test_fraction: float = 0.2
    stratify: str = "none"
    full_time_threshold: float = 12.0
    cohort: str | None = None
    cohort_top_k: int | None = None
    cohort_min_population: int = 50
    target_k: int = 5
    repeats: int = 10
    max_skip_fraction: float = 0.01
    tz: str = "UTC"
    synth: dict = field(default_factory=dict)

    def validate(self) -> "RunConfig":
        if self.window not in ("4", "8", "12", "full", "combined"):
            raise ConfigError(f"window must be 4, 8, 12, full or combined, got {self.window!r}")
        if self.family not in ("gbm", "linear"):
            raise ConfigError(f"family must be gbm or linear, got {self.family!r}")
        if self.stratify not in ("none", "outcome", "term"):
            raise ConfigError(f"stratify must be none, outcome or term, got {self.stratify!r}")
        if not 0 < self.test_fraction < 1:
            raise ConfigError("test_fraction must be in (0, 1)")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        parse_grid(self.grid)
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def parse_grid(text: str) -> np.ndarray:
    """``start:stop:step`` in hours, stop inclusive; or a comma list."""
    text = str(text).strip()
    try:
        if ":" in text:
            start, stop, step = (float(v) for v in text.split(":"))
            if step <= 0 or stop < start:
                raise ConfigError(f"bad grid {text!r}")
            n = int(round((stop - start) / step))
            grid = start + step * np.arange(n + 1)
            return grid[grid <= stop + 1e-9]
        grid = np.array([float(v) for v in text.split(",") if v.strip()])
    except ValueError as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(f"bad grid {text!r}") from None
    if grid.size == 0 or np.any(np.diff(grid) <= 0):
        raise ConfigError(f"grid must be non-empty and ascending: {text!r}")
    return grid


def _coerce(name: str, value):
    if name == "features" and isinstance(value, str):
        return [v.strip() for v in value.split(",") if v.strip()]
    if name in ("window", "grid") and not isinstance(value, str):
        return str(value)
    return value


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Defaults, then the TOML file, then non-None ``overrides``."""
    values = {}
    known = {f.name for f in fields(RunConfig)}
    if path is not None:
        try:
            data = tomllib.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"{path}: {e}") from None
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"{path}: unknown key(s) {', '.join(unknown)}")
        values.update({k: _coerce(k, v) for k, v in data.items()})
    for k, v in (overrides or {}).items():
        if v is not None:
            values[k] = _coerce(k, v)
    try:
        return RunConfig(**values).validate()
    except TypeError as e:
        raise ConfigError(str(e)) from None
