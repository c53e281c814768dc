"""
Oracle, noisy and adversarial classifiers
=========================================

A simulated corpus stands in for detector output.  Fusing a perfect
classifier shows the ceiling; noisy classifiers show why soft rejection
beats hard rejection; an adversarial classifier shows the damage a hard
veto can do.
"""

# %%
from snfusion import SceneConfig, SimClassifierSpec, compute_curve, fuse_all, generate_corpus, hard_reject, simulate_verdicts

scenes = generate_corpus(200, SceneConfig(), seed=7, mean_pedestrians=2.0)
candidates = [c for s in scenes for c in s.candidates]
gt = [a for s in scenes for a in s.gt]
frames = [s.frame_id for s in scenes]


def lamr(dets):
    return compute_curve(dets, gt, "Reasonable", frames=frames).lamr


def votes(spec):
    return [v for s in scenes for v in simulate_verdicts(s, spec)]


noisy = votes(SimClassifierSpec("resnet", tpr=0.9, fpr=0.1, rng_seed=11)) + votes(
    SimClassifierSpec("googlenet", tpr=0.9, fpr=0.1, rng_seed=12)
)
adversary = votes(SimClassifierSpec("adversary", tpr=0.0, fpr=1.0, rng_seed=5))

print(f"generator alone        {lamr(candidates):.4f}")
print(f"oracle, soft           {lamr(fuse_all(candidates, votes(SimClassifierSpec.oracle()))):.4g}")
print(f"two noisy, soft        {lamr(fuse_all(candidates, noisy)):.4f}")
print(f"two noisy, hard        {lamr(hard_reject(candidates, noisy, 0.5)):.4f}")
print(f"adversary, hard        {lamr(hard_reject(candidates, adversary, 0.5)):.4f}")
print(f"adversary, soft        {lamr(fuse_all(candidates, adversary)):.4f}")
