"""Which features matter: correlation ranking, recursive elimination and
permutation importance over a pool of login and grade features.
"""

import logging

from lmsfeat.analytics import rank_by_correlation
from lmsfeat.models import GbmParams, permutation_importance, rfe, train_gbm
from lmsfeat.pipeline import FeatureBuilder, train_test
from lmsfeat.synth import SynthConfig, synthesize

# the synthetic letter grades trip the mixed-scale warning on purpose
logging.getLogger("lmsfeat").setLevel(logging.ERROR)

ds = synthesize(SynthConfig(n_students=1500, seed=9))
builder = FeatureBuilder(ds)
pool = [
    "raw_logins", "periodic_logins", "daily_logins", "halfday_logins",
    "grade_value", "grade_ratio", "grade_ratio_course", "grade_median_credit",
    "hours_attempted",
]

ranked = rank_by_correlation(builder.wide(pool + ["semester_gpa"]), pool, ["semester_gpa"])
print("ranked by |r| with semester GPA:")
for f in ranked["semester_gpa"]:
    print(f"  {f.feature:<22} r = {f.r:+.3f}")

fm = builder.matrix(pool, "semester_gpa")
res = rfe(fm, GbmParams(n_trees=60), target_k=3)
print("\nrecursive elimination keeps:", res.selected)
print("dropped in order:", [name for name, _ in res.eliminated])

train, test = train_test(builder, pool, "semester_gpa")
imp = permutation_importance(train_gbm(train, GbmParams(n_trees=100)), test, repeats=5)
print(f"\npermutation importance (drop in {imp.metric}):")
for name, drop in imp.ranked():
    print(f"  {name:<22} {drop:.4f}")
