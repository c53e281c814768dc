"""
Overlap, labels and mask coverage
=================================

Boxes are ``x, y, w, h`` in pixels.  Jaccard overlap drives both candidate
labeling and evaluation matching; mask coverage counts pedestrian pixels
whose centers fall inside a box.
"""

# %%
# Two offset squares share one unit of area out of seven.
from snfusion import BoundingBox, GroundTruthAnnotation, SegmentationMask, jaccard, label_candidates, mask_coverage

a = BoundingBox(0, 0, 2, 2)
b = BoundingBox(1, 1, 2, 2)
print("IoU of offset squares:", jaccard(a, b))

# %%
# A candidate is positive only when its best overlap is strictly above 0.5.
# Half of a GT box, lying inside it, sits exactly on the boundary.
gt = [GroundTruthAnnotation("f0", BoundingBox(0, 0, 4, 2))]
candidates = [BoundingBox(0, 0, 4, 2), BoundingBox(0, 0, 2, 2), BoundingBox(0, 0, 3, 2)]
for box, label in zip(candidates, label_candidates(candidates, gt)):
    print(f"{box.as_list()} -> IoU {jaccard(box, gt[0].box):.3f}, label {label}")

# %%
# Occlusion comes from the visible part of the box.
person = GroundTruthAnnotation("f0", BoundingBox(10, 10, 20, 60), visible_box=BoundingBox(10, 10, 20, 40))
print("occlusion fraction:", round(person.occlusion_fraction, 4))

# %%
# A 4x4 mask with a 2x2 pedestrian block covers a quarter of the full raster.
import numpy as np

pixels = np.zeros((4, 4), dtype=bool)
pixels[1:3, 1:3] = True
mask = SegmentationMask("f0", 4, 4, pixels)
print("coverage of the whole raster:", mask_coverage(BoundingBox(0, 0, 4, 4), mask))
print("coverage of the block itself:", mask_coverage(BoundingBox(1, 1, 2, 2), mask))
