"""
Segmentation votes
==================

A binary pedestrian mask gives one more factor.  When more than 20% of a
box is covered the score is left alone; below that it is scaled by
``max(4 * coverage, 0.35)``.
"""

# %%
from snfusion import SceneConfig, fuse_segmentation, generate_scene, mask_coverage, synthesize_mask

scene = generate_scene(SceneConfig(n_pedestrians=2, n_false_positives=4), seed=3)
mask = synthesize_mask(scene, coverage_quality=0.8)

for c, label in zip(scene.candidates, scene.labels):
    cov = mask_coverage(c.box, mask)
    out = fuse_segmentation(c, cov)
    kind = "pedestrian" if label else "background"
    print(f"{c.id} {kind:>10}: coverage {cov:.2f}, score {c.score_generator:.3f} -> {out.score_fused:.3f}")
