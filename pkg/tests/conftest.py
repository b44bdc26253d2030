import datetime as dt
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from lmsfeat import Dataset, TermCalendar  # noqa: E402

SPRING = TermCalendar("2024SP", dt.date(2024, 1, 15), dt.date(2024, 5, 10), ((dt.date(2024, 3, 11), dt.date(2024, 3, 15)),))


def ts(day, hour=12):
    """UTC instant ``day`` calendar days after the spring start, at ``hour``."""
    base = dt.datetime(2024, 1, 15, tzinfo=dt.timezone.utc)
    return (base + dt.timedelta(days=day, hours=hour)).isoformat()


@pytest.fixture
def spring():
    return SPRING


@pytest.fixture
def small_dataset():
    """Three students in one term with hand-countable logins and grades."""
    logins = [
        ("s1", ts(0, 8)), ("s1", ts(0, 9)), ("s1", ts(0, 20)), ("s1", ts(1, 10)), ("s1", ts(40, 10)),
        ("s2", ts(2, 1)), ("s2", ts(2, 2)), ("s2", ts(3, 3)),
        ("ghost", ts(5, 5)),
    ]
    grades = [
        ("s1", "C1", "q1", ts(3), 45, 50, "A"),
        ("s1", "C1", "q2", ts(4), 8, 10, "85"),
        ("s1", "C2", "q1", ts(5), 30, 40, "B"),
        ("s2", "C1", "q1", ts(3), 40, 50, "C"),
        ("s2", "C1", "q1", ts(10), 50, 50, "A"),
        ("s3", "C2", "q1", ts(6), 20, 40, "Incomplete"),
    ]
    enrollments = [
        ("s1", "C1", "2024SP", 3), ("s1", "C2", "2024SP", 1), ("s1", "C3", "2024SP", 9),
        ("s2", "C1", "2024SP", 3), ("s3", "C2", "2024SP", 4),
    ]
    roster = [
        {"student_id": "s1", "term_id": "2024SP", "semester_gpa": 3.5, "overall_gpa": 3.4, "discontinued": 0, "major": "BIOL"},
        {"student_id": "s2", "term_id": "2024SP", "semester_gpa": 2.0, "overall_gpa": 2.5, "discontinued": 1, "major": "PSYC"},
        {"student_id": "s3", "term_id": "2024SP", "semester_gpa": 3.0, "overall_gpa": 3.1, "discontinued": 0, "major": "BIOL"},
    ]
    return Dataset.from_records(logins=logins, grades=grades, enrollments=enrollments, roster=roster, calendars=[SPRING])


# one line per acceptance criterion, repeated at the end of the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
