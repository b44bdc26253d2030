import datetime as dt
import textwrap

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lmsfeat import (
    DataValidationError,
    SchemaError,
    TermCalendar,
    instructional_day_index,
    load_dataset,
    week_of,
    window_filter,
)
from lmsfeat.ingest import parse_breaks, parse_window
from oracles import instructional_day

D = dt.date

TERMS = "term_id,start_date,end_date,breaks\n2024SP,2024-01-15,2024-05-10,2024-03-11..2024-03-15\n"
ROSTER = "student_id,term_id,semester_gpa,overall_gpa,discontinued\ns1,2024SP,3.2,3.1,0\ns2,2024SP,2.1,2.4,1\n"
ENROLL = "student_id,course_id,term_id,credit_hours\ns1,C1,2024SP,3\ns2,C1,2024SP,4\n"
GRADES = (
    "student_id,course_id,grade_item_id,awarded_at,points_numerator,points_denominator,grade_value\n"
    "s1,C1,q1,2024-01-20T10:00:00Z,8,10,\n"
)
LOGINS = "student_id,timestamp\n" + "".join(f"s1,2024-01-{16 + i}T10:00:00Z\n" for i in range(5))


def write(tmp_path, **files):
    contents = {"logins": LOGINS, "grades": GRADES, "enrollments": ENROLL, "roster": ROSTER, "terms": TERMS}
    contents.update(files)
    for name, text in contents.items():
        (tmp_path / f"{name}.csv").write_text(textwrap.dedent(text))
    return tmp_path


# --- calendar arithmetic ---------------------------------------------------


def test_start_date_is_day_zero():
    cal = TermCalendar("T", D(2025, 1, 13), D(2025, 5, 9))
    assert instructional_day_index(cal, D(2025, 1, 13)) == 0


def test_one_week_later_no_breaks():
    cal = TermCalendar("T", D(2025, 1, 13), D(2025, 5, 9))
    assert instructional_day_index(cal, D(2025, 1, 20)) == 7


def test_break_days_are_skipped():
    cal = TermCalendar("T", D(2025, 1, 13), D(2025, 5, 9), ((D(2025, 3, 10), D(2025, 3, 14)),))
    assert instructional_day_index(cal, D(2025, 3, 17)) == 58
    # break days inherit the previous instructional day
    assert instructional_day_index(cal, D(2025, 3, 12)) == instructional_day_index(cal, D(2025, 3, 9))


def test_out_of_term_dates():
    cal = TermCalendar("T", D(2025, 1, 13), D(2025, 5, 9))
    assert instructional_day_index(cal, D(2025, 1, 12)) is None
    assert instructional_day_index(cal, D(2025, 5, 10)) is None


def test_week_boundaries():
    cal = TermCalendar("T", D(2025, 1, 13), D(2025, 5, 9))
    assert week_of(cal, "2025-01-13T00:00:00Z") == 1
    # index 27 is the last day of week 4, index 28 starts week 5
    assert week_of(cal, "2025-02-09T23:00:00Z") == 4
    assert week_of(cal, "2025-02-10T01:00:00Z") == 5
    assert week_of(cal, "2025-05-10T12:00:00Z") is None


def test_window_filter_examples():
    cal = TermCalendar("T", D(2025, 1, 13), D(2025, 5, 9))
    starts = [D(2025, 1, 13) + dt.timedelta(weeks=w) for w in (0, 4, 8, 12)]
    instants = [f"{d.isoformat()}T12:00:00Z" for d in starts]
    assert window_filter(instants, cal, "full") == instants
    assert window_filter(instants, cal, 8) == instants[:2]
    assert window_filter([], cal, 4) == []


def test_calendar_rejects_bad_breaks():
    with pytest.raises(ValueError):
        TermCalendar("T", D(2025, 1, 13), D(2025, 5, 9), ((D(2025, 3, 14), D(2025, 3, 10)),))
    with pytest.raises(ValueError):
        TermCalendar("T", D(2025, 1, 13), D(2025, 5, 9), ((D(2025, 3, 1), D(2025, 3, 10)), (D(2025, 3, 5), D(2025, 3, 12))))
    with pytest.raises(ValueError):
        TermCalendar("T", D(2025, 1, 13), D(2025, 5, 9), ((D(2025, 5, 1), D(2025, 5, 20)),))
    with pytest.raises(ValueError):
        TermCalendar("T", D(2025, 5, 9), D(2025, 1, 13))


def test_parse_helpers():
    assert parse_breaks("2024-03-11..2024-03-15") == ((D(2024, 3, 11), D(2024, 3, 15)),)
    assert parse_breaks("") == ()
    assert parse_window("full") is None
    assert parse_window("8") == 8
    with pytest.raises(ValueError):
        parse_window(0)


def test_time_zone_shifts_the_day():
    cal = TermCalendar("T", D(2025, 1, 13), D(2025, 5, 9))
    # 03:00 UTC on the 13th is still the 12th in Chicago
    assert week_of(cal, "2025-01-13T03:00:00Z", tz="America/Chicago") is None
    assert week_of(cal, "2025-01-13T03:00:00Z") == 1


dates = st.dates(min_value=D(2024, 1, 1), max_value=D(2024, 12, 31))


@st.composite
def calendars(draw, with_breaks=True):
    start = draw(dates)
    length = draw(st.integers(1, 150))
    end = start + dt.timedelta(days=length - 1)
    breaks = []
    if with_breaks and length > 4:
        cuts = sorted(draw(st.lists(st.integers(0, length - 1), max_size=4, unique=True)))
        for lo, hi in zip(cuts[::2], cuts[1::2]):
            breaks.append((start + dt.timedelta(days=lo), start + dt.timedelta(days=hi)))
    return TermCalendar("T", start, end, tuple(breaks))


@settings(max_examples=100, deadline=None)
@given(calendars(with_breaks=False), st.integers(0, 200))
def test_no_breaks_index_is_day_difference(cal, offset):
    d = cal.start_date + dt.timedelta(days=offset)
    expected = offset if d <= cal.end_date else None
    assert instructional_day_index(cal, d) == expected


@settings(max_examples=100, deadline=None)
@given(calendars(), st.integers(-3, 200))
def test_index_matches_day_by_day_count(cal, offset):
    d = cal.start_date + dt.timedelta(days=offset)
    assert instructional_day_index(cal, d) == instructional_day(cal.start_date, cal.end_date, cal.breaks, d)


@settings(max_examples=100, deadline=None)
@given(calendars(), st.lists(st.integers(0, 160 * 24), max_size=60))
def test_week_counts_partition_in_term_events(cal, hours):
    base = dt.datetime.combine(cal.start_date, dt.time(), tzinfo=dt.timezone.utc)
    instants = [base + dt.timedelta(hours=h) for h in hours]
    weeks = cal.weeks(instants) if instants else np.zeros(0, int)
    in_term = sum(1 for t in instants if t.date() <= cal.end_date)
    per_week = np.bincount(weeks[weeks > 0]) if len(weeks) else np.zeros(0)
    assert per_week.sum() == in_term


@settings(max_examples=100, deadline=None)
@given(calendars(), st.lists(st.integers(-48, 160 * 24), max_size=40))
def test_windows_are_nested(cal, hours):
    base = dt.datetime.combine(cal.start_date, dt.time(), tzinfo=dt.timezone.utc)
    instants = [base + dt.timedelta(hours=h) for h in hours]
    w4, w8, w12 = (set(map(str, window_filter(instants, cal, w))) for w in (4, 8, 12))
    assert w4 <= w8 <= w12


# --- file loading ----------------------------------------------------------


def test_empty_logins_file(tmp_path):
    ds = load_dataset(write(tmp_path, logins="student_id,timestamp\n"))
    assert len(ds.logins) == 0
    assert ds.report.files["logins"].skipped == 0


def test_grade_row_without_payload_is_skipped(tmp_path):
    grades = GRADES + "s1,C1,q2,2024-01-21T10:00:00Z,,,\n"
    ds = load_dataset(write(tmp_path, grades=grades), max_skip_fraction=0.6)
    r = ds.report.files["grades"]
    assert (r.rows, r.loaded, r.skipped) == (2, 1, 1)
    assert r.skip_reasons == {"no numerator, denominator or grade value": 1}


def test_bad_timestamp_over_threshold_is_fatal(tmp_path):
    logins = "student_id,timestamp\n" + "".join(f"s1,2024-01-{16 + i}T10:00:00Z\n" for i in range(4)) + "s1,not-a-date\n"
    with pytest.raises(DataValidationError) as err:
        load_dataset(write(tmp_path, logins=logins))
    r = err.value.report.files["logins"]
    assert (r.loaded, r.skipped) == (4, 1)
    assert r.skip_fraction == pytest.approx(0.2)


def test_bad_timestamp_under_threshold_loads(tmp_path):
    logins = "student_id,timestamp\n" + "".join(f"s1,2024-01-{16 + i}T10:00:00Z\n" for i in range(4)) + "s1,not-a-date\n"
    ds = load_dataset(write(tmp_path, logins=logins), max_skip_fraction=0.25)
    assert len(ds.logins) == 4


def test_missing_header_column_names_file_and_column(tmp_path):
    with pytest.raises(SchemaError, match="roster.*discontinued"):
        load_dataset(write(tmp_path, roster="student_id,term_id,semester_gpa,overall_gpa\ns1,2024SP,3,3\n"))


def test_missing_file(tmp_path):
    write(tmp_path)
    (tmp_path / "terms.csv").unlink()
    with pytest.raises(FileNotFoundError):
        load_dataset(tmp_path)


def test_orphans_are_counted(tmp_path):
    logins = LOGINS + "nobody,2024-01-20T10:00:00Z\n"
    ds = load_dataset(write(tmp_path, logins=logins))
    assert ds.report.orphan_logins == 1
    assert ds.report.orphan_grades == 0


def test_duplicate_enrollment_and_roster_rows_skipped(tmp_path):
    ds = load_dataset(
        write(tmp_path, enrollments=ENROLL + "s1,C1,2024SP,3\n", roster=ROSTER + "s1,2024SP,1.0,1.0,0\n"),
        max_skip_fraction=0.5,
    )
    assert ds.report.files["enrollments"].skip_reasons == {"duplicate enrollment": 1}
    assert ds.report.files["roster"].skip_reasons == {"duplicate roster row": 1}
    assert ds.roster.loc[ds.roster.student_id == "s1", "semester_gpa"].item() == 3.2


def test_enrollment_without_calendar_is_skipped(tmp_path):
    ds = load_dataset(write(tmp_path, enrollments=ENROLL + "s1,C9,2099XX,3\n"), max_skip_fraction=0.5)
    assert len(ds.enrollments) == 2
    assert ds.report.files["enrollments"].skip_reasons == {"term without calendar": 1}


def test_roster_outcome_may_be_missing(tmp_path):
    ds = load_dataset(write(tmp_path, roster=ROSTER + "s3,2024SP,,,\n"))
    assert np.isnan(ds.roster.loc[ds.roster.student_id == "s3", "semester_gpa"].item())


def test_extra_roster_columns_are_kept(tmp_path):
    roster = "student_id,term_id,semester_gpa,overall_gpa,discontinued,major,hours\ns1,2024SP,3,3,0,BIOL,12\n"
    ds = load_dataset(write(tmp_path, roster=roster))
    assert ds.extra_columns == ["major", "hours"]
    assert ds.roster["hours"].dtype == float
    assert ds.roster["major"].item() == "BIOL"


def test_timestamps_normalized_to_utc(tmp_path):
    logins = "student_id,timestamp\ns1,2024-01-16T05:00:00-05:00\n"
    ds = load_dataset(write(tmp_path, logins=logins))
    assert ds.logins["timestamp"].iloc[0].isoformat() == "2024-01-16T10:00:00+00:00"


def test_source_row_follows_file_order(tmp_path):
    grades = GRADES + "s1,C1,q1,2024-01-20T10:00:00Z,9,10,\ns2,C1,q1,2024-01-20T10:00:00Z,1,10,\n"
    ds = load_dataset(write(tmp_path, grades=grades))
    assert list(ds.grades["source_row"]) == [0, 1, 2]


def test_load_is_deterministic(tmp_path):
    d = write(tmp_path)
    a, b = load_dataset(d), load_dataset(d)
    for name in ("logins", "grades", "enrollments", "roster"):
        assert getattr(a, name).equals(getattr(b, name))
    assert a.report.to_dict() == b.report.to_dict()
