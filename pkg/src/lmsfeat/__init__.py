"""Features from LMS login and grade logs, and models that use them."""

from .ingest import (
    DataValidationError,
    Dataset,
    SchemaError,
    TermCalendar,
    instructional_day_index,
    load_dataset,
    week_of,
    window_filter,
)
from .login_features import (
    GapParams,
    SweepResult,
    build_login_index,
    capped_login_count,
    distinct_period_count,
    gap_sweep,
    login_feature_table,
    periodic_login_count,
)
from .grade_features import (
    DEFAULT_LETTER_MAP,
    GradeVariant,
    LetterMap,
    dedup_last,
    grade_feature_table,
    parse_grade_value,
)
from .analytics import CohortSpec, cohort_sweep, pearson, rank_by_correlation, term_summary
from .synth import SynthConfig, audit, generate, synthesize

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_LETTER_MAP",
    "CohortSpec",
    "DataValidationError",
    "Dataset",
    "GapParams",
    "GradeVariant",
    "LetterMap",
    "SchemaError",
    "SweepResult",
    "SynthConfig",
    "TermCalendar",
    "audit",
    "build_login_index",
    "capped_login_count",
    "cohort_sweep",
    "dedup_last",
    "distinct_period_count",
    "gap_sweep",
    "generate",
    "grade_feature_table",
    "instructional_day_index",
    "load_dataset",
    "login_feature_table",
    "parse_grade_value",
    "pearson",
    "periodic_login_count",
    "rank_by_correlation",
    "synthesize",
    "term_summary",
    "week_of",
    "window_filter",
]
