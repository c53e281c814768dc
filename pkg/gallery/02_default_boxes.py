"""
Default boxes of a detection layer
==================================

Each grid cell of an output layer carries seven default boxes, one per
aspect ratio.  The pedestrian ratio 0.41 appears twice, once at the main
height of the layer and once at the next height up.
"""

# %%
from snfusion import AnchorConfig, LayerSpec, default_box_array, generate_default_boxes
from snfusion.anchors import RATIO_NAMES

boxes = generate_default_boxes(LayerSpec(1, 1, 0))
for name, box in zip(RATIO_NAMES, boxes):
    print(f"ratio {name:>5}: w {box.w:7.2f}  h {box.h:7.2f}")

# %%
# A 38x38 grid yields 38 * 38 * 7 boxes.  They are not clipped to the image.
arr = default_box_array(LayerSpec(38, 38, 0))
print("boxes on a 38x38 layer:", len(arr))
print("leftmost edge:", arr[:, 0].min().round(2), "rightmost edge:", (arr[:, 0] + arr[:, 2]).max().round(2))

# %%
# Heights scale with the image; here a 1280x960 input doubles every size.
big = default_box_array(LayerSpec(1, 1, 0), AnchorConfig(image_w=1280, image_h=960))
print("0.41b height at 960 px:", big[RATIO_NAMES.index("0.41b"), 3])
