"""End-to-end run: candidates -> classifier fusion -> mask fusion -> NMS -> curve."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .evaluation import MissRateCurve, compute_curve, get_setting
from .fusion import (
    HARD_SS_COVERAGE,
    FusionParams,
    collect_for_classification,
    fuse_all,
    fuse_segmentation,
    hard_reject,
    nms,
)
from .geometry import mask_coverage
from . import io

PREFILTER_MODES = ("none", "drop", "skip")


@dataclass(frozen=True)
class RunConfig:
    """Everything one pipeline run needs.

    ``prefilter`` applies the collection thresholds before classification:
    ``drop`` removes small/low-score candidates, ``skip`` keeps them but
    leaves them unscored by the classifiers.
    """

    detections: str
    annotations: Optional[str] = None
    fusion: FusionParams = FusionParams()
    setting: str = "Reasonable"
    classifier_files: Sequence[str] = ()
    mask_dir: Optional[str] = None
    frames_file: Optional[str] = None
    nms_iou: Optional[float] = None
    strict: bool = True
    hard: bool = False
    hard_threshold: float = 0.5
    prefilter: str = "none"
    workers: int = 1

    def __post_init__(self):
        if self.prefilter not in PREFILTER_MODES:
            raise ValueError(f"prefilter must be one of {PREFILTER_MODES}")
        if self.nms_iou is not None and not 0 < self.nms_iou < 1:
            raise ValueError("nms_iou must be in (0, 1)")
        get_setting(self.setting)


@dataclass
class RunResult:
    candidates: list
    curve: Optional[MissRateCurve] = None
    frames: list = field(default_factory=list)


def _read_all_verdicts(paths: Sequence[str], workers: int) -> list:
    if not paths:
        return []
    if workers > 1 and len(paths) > 1:
        with ThreadPoolExecutor(max_workers=min(workers, len(paths))) as pool:
            parts = list(pool.map(io.read_verdicts, paths))
    else:
        parts = [io.read_verdicts(p) for p in paths]
    return [v for part in parts for v in part]


def _coverages(candidates, masks) -> dict:
    return {
        c.id: mask_coverage(c.box, masks[c.frame_id], c.frame_id)
        for c in candidates
        if c.frame_id in masks
    }


def fuse_candidates(candidates, verdicts, config: RunConfig, masks: Optional[dict] = None) -> list:
    """Fusion stages of the pipeline on in-memory inputs."""
    params = config.fusion
    skip = None
    if config.prefilter == "drop":
        candidates = collect_for_classification(candidates, params)
        ids = {c.id for c in candidates}
        verdicts = [v for v in verdicts if v.candidate_id in ids]
    elif config.prefilter == "skip":
        kept = {c.id for c in collect_for_classification(candidates, params)}
        skip = lambda c: c.id not in kept  # noqa: E731
        verdicts = [v for v in verdicts if v.candidate_id in kept]
    classifiers = sorted({v.classifier_id for v in verdicts})

    if config.hard:
        pool = [c for c in candidates if skip is None or not skip(c)]
        alive = {c.id for c in hard_reject(pool, verdicts, config.hard_threshold,
                                           classifiers=classifiers, strict=config.strict)}
        if skip is not None:
            alive.update(c.id for c in candidates if skip(c))
        if masks:
            cover = _coverages(candidates, masks)
            alive = {i for i in alive if cover.get(i, 1.0) >= HARD_SS_COVERAGE}
        fused = [c for c in candidates if c.id in alive]
    else:
        fused = fuse_all(candidates, verdicts, params, classifiers, config.strict, skip)
        if masks:
            fused = [
                fuse_segmentation(c, mask_coverage(c.box, masks[c.frame_id], c.frame_id), params)
                if c.frame_id in masks else c
                for c in fused
            ]

    if config.nms_iou is not None:
        by_frame = {}
        for c in fused:
            by_frame.setdefault(c.frame_id, []).append(c)
        kept = set()
        for group in by_frame.values():
            kept.update(c.id for c in nms(group, config.nms_iou))
        fused = [c for c in fused if c.id in kept]
    return fused


def run_pipeline(config: RunConfig) -> RunResult:
    candidates = io.read_detections(config.detections)
    verdicts = _read_all_verdicts(config.classifier_files, config.workers)
    frames = io.read_frames(config.frames_file) if config.frames_file else None
    annotations = io.read_annotations(config.annotations) if config.annotations else []
    if frames is None:
        frames = sorted({c.frame_id for c in candidates} | {a.frame_id for a in annotations})
    if not frames:
        raise ValueError("no frames in the inputs")
    masks = io.read_masks(config.mask_dir, frames) if config.mask_dir else None
    fused = fuse_candidates(candidates, verdicts, config, masks)
    curve = None
    if config.annotations:
        curve = compute_curve(fused, annotations, config.setting, frames=frames, workers=config.workers)
    return RunResult(fused, curve, frames)
