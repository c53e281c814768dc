"""Synthetic scenes, classifier verdicts and segmentation masks.

Stand-ins for the neural networks so the fusion ablations run without any
model.  All randomness comes from NumPy's PCG64 bit generator seeded via
``SeedSequence``: a scene is a pure function of ``(config, seed)`` and a
noisy verdict set draws from the entropy ``[spec.rng_seed, scene.rng_seed]``.
Frame ``k`` of a corpus gets the scene seed
``SeedSequence([corpus_seed, k]).generate_state(1)[0]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .fusion import Candidate, ClassifierVerdict, FusionParams
from .geometry import (
    BoundingBox,
    GroundTruthAnnotation,
    SegmentationMask,
    box_pixel_slices,
    intersection_area,
    jaccard,
    label_candidates,
)

MAX_PLACEMENT_TRIES = 200


def make_rng(*entropy: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(list(entropy))))


@dataclass(frozen=True)
class SceneConfig:
    """Knobs for one synthetic frame.

    ``n_false_positives`` defaults to ``round(fp_ratio * n_pedestrians)``;
    ``jitter`` is the max shift/scale perturbation of a true candidate,
    relative to the GT box size.
    """

    image_w: int = 640
    image_h: int = 480
    n_pedestrians: int = 2
    n_false_positives: Optional[int] = None
    fp_ratio: float = 2.4
    min_height: float = 40.0
    max_height: float = 200.0
    aspect_mean: float = 0.41
    aspect_sd: float = 0.04
    jitter: float = 0.08
    tp_score_range: tuple = (0.4, 1.0)
    fp_score_range: tuple = (0.01, 0.7)
    fp_max_iou: float = 0.3
    frame_prefix: str = "sim"

    def __post_init__(self):
        if self.image_w <= 0 or self.image_h <= 0:
            raise ValueError("image dimensions must be positive")
        if self.n_pedestrians < 0:
            raise ValueError("n_pedestrians must be >= 0")
        if not 0 < self.min_height <= self.max_height:
            raise ValueError("need 0 < min_height <= max_height")

    @property
    def fp_count(self) -> int:
        if self.n_false_positives is not None:
            return self.n_false_positives
        return int(round(self.fp_ratio * self.n_pedestrians))


@dataclass(frozen=True)
class SyntheticScene:
    frame_id: str
    image_w: int
    image_h: int
    gt: tuple
    candidates: tuple
    rng_seed: int
    labels: tuple = field(default=())


@dataclass(frozen=True)
class SimClassifierSpec:
    """A fake classifier.

    ``tpr`` is the chance a true candidate gets ``p >= a_c``; ``fpr`` the
    chance a false one does.  The oracle is ``tpr=1, fpr=0`` with hard 0/1
    probabilities.
    """

    name: str = "clf"
    kind: str = "noisy"
    tpr: float = 0.9
    fpr: float = 0.1
    rng_seed: int = 0

    def __post_init__(self):
        if self.kind not in ("oracle", "noisy"):
            raise ValueError(f"kind must be 'oracle' or 'noisy', got {self.kind!r}")
        if not (0 <= self.tpr <= 1 and 0 <= self.fpr <= 1):
            raise ValueError("tpr and fpr must lie in [0, 1]")
        if self.kind == "oracle" and (self.tpr != 1 or self.fpr != 0):
            raise ValueError("an oracle classifier has tpr = 1 and fpr = 0")

    @classmethod
    def oracle(cls, name: str = "oracle") -> "SimClassifierSpec":
        return cls(name=name, kind="oracle", tpr=1.0, fpr=0.0)


def _sample_pedestrian(rng, config: SceneConfig, max_h: float) -> Optional[BoundingBox]:
    h = rng.uniform(config.min_height, max(config.min_height, min(config.max_height, max_h)))
    ratio = float(np.clip(rng.normal(config.aspect_mean, config.aspect_sd), 0.2, 0.8))
    w = ratio * h
    if w > config.image_w or h > config.image_h:
        return None
    x = rng.uniform(0, config.image_w - w)
    y = rng.uniform(0, config.image_h - h)
    return BoundingBox(float(x), float(y), float(w), float(h))


def _place_pedestrians(rng, config: SceneConfig) -> list:
    boxes = []
    for _ in range(config.n_pedestrians):
        for _ in range(MAX_PLACEMENT_TRIES):
            b = _sample_pedestrian(rng, config, config.image_h)
            if b is None:
                continue
            if all(intersection_area(b, o) == 0.0 for o in boxes):
                boxes.append(b)
                break
        else:
            raise ValueError(
                f"could not place {config.n_pedestrians} non-overlapping pedestrians in "
                f"{config.image_w}x{config.image_h}"
            )
    return boxes


def _jittered(rng, gt: BoundingBox, jitter: float) -> BoundingBox:
    if jitter == 0:
        return gt
    for _ in range(MAX_PLACEMENT_TRIES):
        dx, dy, sw, sh = rng.uniform(-jitter, jitter, size=4)
        w = gt.w * (1 + sw)
        h = gt.h * (1 + sh)
        box = BoundingBox(gt.x + dx * gt.w, gt.y + dy * gt.h, w, h)
        if jaccard(box, gt) > 0.5:
            return box
    return gt


def _background_box(rng, config: SceneConfig, gt_boxes: list) -> BoundingBox:
    for _ in range(MAX_PLACEMENT_TRIES):
        b = _sample_pedestrian(rng, config, config.image_h)
        if b is None:
            continue
        if all(jaccard(b, g) < config.fp_max_iou for g in gt_boxes):
            return b
    raise ValueError("could not place a background candidate away from the pedestrians")


def generate_scene(config: SceneConfig = SceneConfig(), seed: int = 0, frame_id: Optional[str] = None) -> SyntheticScene:
    """One frame: GT pedestrians plus a candidate pool that covers all of them.

    Every GT box gets one jittered true candidate (IoU > 0.5) with a score
    from ``tp_score_range``; ``fp_count`` background boxes get scores from
    ``fp_score_range``.  Candidate order, and hence ids, is shuffled.
    """
    rng = make_rng(seed)
    frame_id = frame_id if frame_id is not None else f"{config.frame_prefix}{seed:06d}"
    gt_boxes = _place_pedestrians(rng, config)
    pool = []
    for g in gt_boxes:
        pool.append((_jittered(rng, g, config.jitter), float(rng.uniform(*config.tp_score_range))))
    for _ in range(config.fp_count):
        pool.append((_background_box(rng, config, gt_boxes), float(rng.uniform(*config.fp_score_range))))
    order = rng.permutation(len(pool)).tolist()
    candidates = tuple(
        Candidate(f"{frame_id}-c{k:03d}", frame_id, pool[i][0], pool[i][1]) for k, i in enumerate(order)
    )
    gt = tuple(GroundTruthAnnotation(frame_id, b, "person") for b in gt_boxes)
    labels = tuple(label_candidates([c.box for c in candidates], gt))
    return SyntheticScene(frame_id, config.image_w, config.image_h, gt, candidates, seed, labels)


def generate_corpus(
    n_frames: int,
    config: SceneConfig = SceneConfig(),
    seed: int = 0,
    mean_pedestrians: Optional[float] = None,
) -> list:
    """``n_frames`` scenes; with ``mean_pedestrians`` the per-frame count is Poisson."""
    scenes = []
    for k in range(n_frames):
        frame_seed = int(np.random.SeedSequence([seed, k]).generate_state(1)[0])
        cfg = config
        if mean_pedestrians is not None:
            n = int(make_rng(seed, k, 1).poisson(mean_pedestrians))
            cfg = replace(config, n_pedestrians=n)
        scenes.append(generate_scene(cfg, frame_seed, frame_id=f"{config.frame_prefix}{k:06d}"))
    return scenes


def _probability_draws(rng, n: int, confident: np.ndarray, a_c: float) -> np.ndarray:
    u = rng.uniform(0.0, 1.0, size=n)
    # confident votes land in [a_c, 1), the rest in [0, a_c)
    return np.where(confident, a_c + u * (1.0 - a_c), u * a_c)


def simulate_verdicts(
    scene: SyntheticScene, spec: SimClassifierSpec, params: FusionParams = FusionParams()
) -> list:
    labels = np.array(scene.labels or label_candidates([c.box for c in scene.candidates], scene.gt), dtype=bool)
    n = len(scene.candidates)
    if spec.kind == "oracle":
        probs = labels.astype(np.float64)
    else:
        rng = make_rng(spec.rng_seed, scene.rng_seed)
        rates = np.where(labels, spec.tpr, spec.fpr)
        confident = rng.uniform(0.0, 1.0, size=n) < rates
        probs = _probability_draws(rng, n, confident, params.a_c)
    return [
        ClassifierVerdict(c.id, spec.name, float(p)) for c, p in zip(scene.candidates, probs.tolist())
    ]


def synthesize_mask(scene: SyntheticScene, coverage_quality: float = 1.0) -> SegmentationMask:
    """Paint the GT boxes into a binary mask.

    Quality below 1 shrinks each painted box about its center so that it
    keeps roughly ``coverage_quality`` of its area; quality 0 paints nothing.
    """
    if not 0.0 <= coverage_quality <= 1.0:
        raise ValueError("coverage_quality must lie in [0, 1]")
    px = np.zeros((scene.image_h, scene.image_w), dtype=bool)
    scale = math.sqrt(coverage_quality)
    if scale > 0:
        for ann in scene.gt:
            b = ann.box
            w, h = b.w * scale, b.h * scale
            painted = BoundingBox(b.x + (b.w - w) / 2, b.y + (b.h - h) / 2, w, h)
            rows, cols = box_pixel_slices(painted, scene.image_w, scene.image_h)
            px[rows, cols] = True
    return SegmentationMask(scene.frame_id, scene.image_w, scene.image_h, px)
