"""Grade features computed from only the first weeks of term.

Early windows are what an early-alert system would actually have. Later
grade updates never leak into an earlier window.
"""

import logging

from lmsfeat import GradeVariant, SynthConfig, grade_feature_table, pearson, synthesize

# the synthetic letter grades trip the mixed-scale warning on purpose
logging.getLogger("lmsfeat").setLevel(logging.ERROR)

ds = synthesize(SynthConfig(n_students=1500, seed=11))
gpa = ds.roster["semester_gpa"].to_numpy(dtype=float)

variants = ["value", "ratio", "ratio_course", "ratio_credit", "median_course", "median_credit"]
print(f"{'variant':<15}" + "".join(f"{w:>9}" for w in ("4 wk", "8 wk", "12 wk", "full")))
for name in variants:
    v = GradeVariant.parse(name)
    rs = []
    for window in (4, 8, 12, None):
        t = grade_feature_table(ds, v, window=window)
        rs.append(pearson(t.value.to_numpy(dtype=float), gpa).r)
    print(f"{name:<15}" + "".join(f"{r:>9.3f}" for r in rs))

t4 = grade_feature_table(ds, GradeVariant("value"), window=4)
print(f"\nstudent-terms with no graded work by week 4: {t4.value.isna().sum()} of {len(t4)}")
