"""
Miss rate against false positives per image
===========================================

Detections are matched greedily in score order.  One pass produces the
whole FPPI/miss-rate staircase, and the log-average miss rate samples it at
nine FPPI values between 0.01 and 1.
"""

# %%
from snfusion import SETTINGS, BoundingBox, Candidate, GroundTruthAnnotation, compute_curve

gt = [
    GroundTruthAnnotation("a", BoundingBox(0, 0, 40, 100)),
    GroundTruthAnnotation("b", BoundingBox(0, 0, 40, 100)),
    GroundTruthAnnotation("b", BoundingBox(300, 0, 60, 60), category="people"),
]
detections = [
    Candidate("a-1", "a", BoundingBox(2, 1, 40, 100), 0.9),
    Candidate("a-2", "a", BoundingBox(200, 0, 40, 100), 0.8),
    Candidate("b-1", "b", BoundingBox(301, 0, 60, 60), 0.7),
    Candidate("b-2", "b", BoundingBox(1, 3, 40, 100), 0.4),
]
curve = compute_curve(detections, gt, "Reasonable")
for fppi, miss in curve.points:
    print(f"fppi {fppi:.2f}  miss rate {miss:.2f}")
print("log-average miss rate:", round(curve.lamr, 4))

# %%
# The crowd box is ignored: the detection on it is neither a hit nor a
# false positive.  Settings differ only in which GT boxes they evaluate.
for name, setting in SETTINGS.items():
    occ = setting.allowed_occlusion
    lo_bracket = "[" if occ.include_lo else "("
    heights = f"[{setting.min_height_px or 0}, {setting.max_height_px or 'inf'})"
    print(f"{name:>12}: height {heights:<10} occlusion {lo_bracket}{occ.lo}, {occ.hi}]")
