import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from snfusion.evaluation import compute_curve
from snfusion.fusion import FusionParams, fuse_all, fuse_segmentation, ss_factor
from snfusion.geometry import BoundingBox, jaccard, mask_coverage
from snfusion.simulate import (
    SceneConfig,
    SimClassifierSpec,
    generate_corpus,
    generate_scene,
    make_rng,
    simulate_verdicts,
    synthesize_mask,
)


def test_empty_scene_with_false_positives():
    scene = generate_scene(SceneConfig(n_pedestrians=0, n_false_positives=10), seed=1)
    assert scene.gt == ()
    assert len(scene.candidates) == 10
    assert scene.labels == (0,) * 10


def test_zero_jitter_reproduces_gt():
    scene = generate_scene(SceneConfig(n_pedestrians=1, n_false_positives=0, jitter=0.0), seed=2)
    (c,) = scene.candidates
    assert c.box == scene.gt[0].box
    assert jaccard(c.box, scene.gt[0].box) == 1.0
    assert scene.labels == (1,)


def test_same_seed_bit_identical():
    cfg = SceneConfig(n_pedestrians=4)
    assert generate_scene(cfg, seed=99) == generate_scene(cfg, seed=99)
    assert generate_scene(cfg, seed=99) != generate_scene(cfg, seed=100)


def test_rng_is_pcg64_seedsequence():
    a = make_rng(3, 4).random(3)
    b = np.random.Generator(np.random.PCG64(np.random.SeedSequence([3, 4]))).random(3)
    np.testing.assert_array_equal(a, b)


def test_infeasible_placement():
    with pytest.raises(ValueError, match="non-overlapping"):
        generate_scene(SceneConfig(image_w=100, image_h=100, n_pedestrians=50, min_height=60), seed=0)


def test_bad_config():
    with pytest.raises(ValueError):
        SceneConfig(n_pedestrians=-1)
    with pytest.raises(ValueError):
        SceneConfig(image_w=0)


@given(st.integers(0, 2**32 - 1), st.integers(0, 5))
@settings(max_examples=40, deadline=None)
def test_scene_invariants(seed, n):
    cfg = SceneConfig(n_pedestrians=n)
    scene = generate_scene(cfg, seed)
    assert len(scene.candidates) == n + cfg.fp_count
    for ann in scene.gt:
        b = ann.box
        assert 0 <= b.x and b.x2 <= scene.image_w and 0 <= b.y and b.y2 <= scene.image_h
        assert max(jaccard(c.box, b) for c in scene.candidates) > 0.5
    assert sum(scene.labels) == n
    for c in scene.candidates:
        assert 0 < c.score_generator <= 1


def test_corpus_deterministic_and_poisson():
    a = generate_corpus(30, seed=4, mean_pedestrians=2)
    b = generate_corpus(30, seed=4, mean_pedestrians=2)
    assert a == b
    counts = [len(s.gt) for s in a]
    assert len(set(counts)) > 1
    assert [s.frame_id for s in a[:2]] == ["sim000000", "sim000001"]


class TestVerdicts:
    scene = generate_scene(SceneConfig(n_pedestrians=3), seed=5)

    def test_oracle(self):
        vs = simulate_verdicts(self.scene, SimClassifierSpec.oracle())
        for v, label in zip(vs, self.scene.labels):
            assert v.probability == (1.0 if label else 0.0)

    def test_useless_classifier(self):
        vs = simulate_verdicts(self.scene, SimClassifierSpec("u", tpr=1.0, fpr=1.0))
        assert all(v.probability >= FusionParams().a_c for v in vs)

    def test_never_confident(self):
        vs = simulate_verdicts(self.scene, SimClassifierSpec("n", tpr=0.0, fpr=0.0))
        assert all(v.probability < FusionParams().a_c for v in vs)

    def test_deterministic(self):
        spec = SimClassifierSpec("x", tpr=0.8, fpr=0.2, rng_seed=7)
        assert simulate_verdicts(self.scene, spec) == simulate_verdicts(self.scene, spec)

    def test_rates(self):
        scenes = generate_corpus(300, SceneConfig(n_pedestrians=2), seed=8)
        spec = SimClassifierSpec("x", tpr=0.8, fpr=0.2, rng_seed=3)
        hits = {0: [], 1: []}
        for s in scenes:
            for v, label in zip(simulate_verdicts(s, spec), s.labels):
                hits[label].append(v.probability >= 0.7)
        assert np.mean(hits[1]) == pytest.approx(0.8, abs=0.05)
        assert np.mean(hits[0]) == pytest.approx(0.2, abs=0.03)

    def test_oracle_spec_checked(self):
        with pytest.raises(ValueError):
            SimClassifierSpec("o", kind="oracle", tpr=0.9, fpr=0.0)
        with pytest.raises(ValueError):
            SimClassifierSpec("o", tpr=1.1)


class TestMask:
    scene = generate_scene(SceneConfig(n_pedestrians=2, jitter=0.0), seed=6)

    def test_gt_box_fully_covered(self):
        mask = synthesize_mask(self.scene, 1.0)
        for ann in self.scene.gt:
            assert mask_coverage(ann.box, mask) == pytest.approx(1.0, abs=1e-9)

    def test_empty_scene(self):
        scene = generate_scene(SceneConfig(n_pedestrians=0, n_false_positives=3), seed=1)
        assert not synthesize_mask(scene).pixels.any()

    def test_disjoint_false_positive_gets_floor(self):
        mask = synthesize_mask(self.scene, 1.0)
        fp = BoundingBox(0, 0, 1, 1)
        while any(jaccard(fp, a.box) > 0 for a in self.scene.gt):
            fp = BoundingBox(fp.x + 7, 0, 1, 1)
        cov = mask_coverage(fp, mask)
        assert cov == 0.0
        assert ss_factor(cov) == 0.35

    def test_quality_erodes(self):
        covs = [np.mean([mask_coverage(a.box, synthesize_mask(self.scene, q)) for a in self.scene.gt]) for q in (1.0, 0.5, 0.1, 0.0)]
        assert covs == sorted(covs, reverse=True)
        assert covs[-1] == 0.0
        assert covs[1] == pytest.approx(0.5, abs=0.05)

    def test_quality_domain(self):
        with pytest.raises(ValueError):
            synthesize_mask(self.scene, 1.5)


def test_oracle_beats_generator():
    scenes = generate_corpus(60, seed=12, mean_pedestrians=2)
    frames = [s.frame_id for s in scenes]
    gt = [a for s in scenes for a in s.gt]
    cands = [c for s in scenes for c in s.candidates]
    verdicts = [v for s in scenes for v in simulate_verdicts(s, SimClassifierSpec.oracle())]
    base = compute_curve(cands, gt, "Reasonable", frames=frames).lamr
    oracle = compute_curve(fuse_all(cands, verdicts), gt, "Reasonable", frames=frames).lamr
    assert oracle <= base


def test_mask_fusion_demotes_false_positives():
    scene = generate_scene(SceneConfig(n_pedestrians=3), seed=21)
    mask = synthesize_mask(scene)
    for c, label in zip(scene.candidates, scene.labels):
        out = fuse_segmentation(c, mask_coverage(c.box, mask))
        if label:
            assert out.score_fused == c.score_generator
        else:
            assert out.score_fused <= c.score_generator
