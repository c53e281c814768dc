"""
Soft-rejection fusion
=====================

Classifiers do not veto candidates.  Each probability becomes a bounded
factor ``max(p / 0.7, 0.1)``: confident votes boost a score slightly, weak
votes shrink it by at most ten times.  Hard rejection, by contrast, drops a
candidate on any single vote below 0.5.
"""

# %%
from snfusion import BoundingBox, Candidate, ClassifierVerdict, fuse_classifiers, hard_reject, scaling_factor

for p in (0.0, 0.07, 0.35, 0.5, 0.7, 1.0):
    print(f"p = {p:4.2f} -> factor {scaling_factor(p):.4f}")

# %%
# A strong detection with one doubtful vote keeps a usable score.
c = Candidate("c1", "f0", BoundingBox(100, 50, 40, 100), 0.8)
votes = [ClassifierVerdict("c1", "googlenet", 0.9), ClassifierVerdict("c1", "resnet", 0.35)]
fused = fuse_classifiers(c, votes)
print("factors:", fused.applied_factors)
print("fused score:", round(fused.score_fused, 6))
print("survives hard rejection:", bool(hard_reject([c], votes, 0.5)))

# %%
# Order of the votes does not matter: factors are applied by classifier id.
print("same score when reversed:", fuse_classifiers(c, votes[::-1]).score_fused == fused.score_fused)
