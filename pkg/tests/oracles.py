"""Slow, loop-based reference implementations used only by the tests.

They are written from the rule definitions, not from the package code, and
trade speed for obviousness.
"""

import datetime as dt
import math


def greedy_scan(hours, min_gap, max_gap=math.inf):
    """Walk the list once, keeping a candidate when its gap to the last kept is allowed."""
    kept = []
    for t in hours:
        if not kept:
            kept.append(t)
            continue
        gap = t - kept[-1]
        assert gap >= 0, "input must be sorted"
        if min_gap <= gap <= max_gap:
            kept.append(t)
    # every consecutive kept pair respects the bounds
    for a, b in zip(kept, kept[1:]):
        assert min_gap <= b - a <= max_gap
    return len(kept)


def period_buckets(hours, period, origin=0.0):
    return len({math.floor((t - origin) / period) for t in hours})


def instructional_day(start, end, breaks, date):
    """Count instructional days from start, one calendar day at a time."""
    if date < start or date > end:
        return None
    idx = -1
    d = start
    while d <= date:
        on_break = any(lo <= d <= hi for lo, hi in breaks)
        if not on_break:
            idx += 1
        d += dt.timedelta(days=1)
    return max(idx, 0)


def pearson_sums(x, y):
    n = len(x)
    sx, sy = sum(x), sum(y)
    sxy = sum(a * b for a, b in zip(x, y))
    sxx = sum(a * a for a in x)
    syy = sum(b * b for b in y)
    num = n * sxy - sx * sy
    den = math.sqrt(n * sxx - sx * sx) * math.sqrt(n * syy - sy * sy)
    return num / den


def pairwise_auc(scores, labels):
    """Fraction of (positive, negative) pairs ranked correctly, ties count half."""
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    total = 0.0
    for p in pos:
        for q in neg:
            total += 1.0 if p > q else 0.5 if p == q else 0.0
    return total / (len(pos) * len(neg))


def dedup_hashmap(records):
    """records: dicts with student_id, course_id, grade_item_id, awarded_at, source_row."""
    best = {}
    for r in records:
        key = (r["student_id"], r["course_id"], r["grade_item_id"])
        rank = (r["awarded_at"], r["source_row"])
        if key not in best or rank > (best[key]["awarded_at"], best[key]["source_row"]):
            best[key] = r
    return best


def ratio_of_sums(pairs):
    ok = [(n, d) for n, d in pairs if n is not None and d is not None and d > 0]
    if not ok:
        return None
    return sum(n for n, _ in ok) / sum(d for _, d in ok)
