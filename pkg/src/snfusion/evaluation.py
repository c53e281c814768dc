"""Caltech-style evaluation: setting filters, greedy matching, FPPI/miss-rate curves, L-AMR.

Matching follows the usual Caltech protocol.  Detections are visited in
descending score order (ties by ascending id); each one claims the unmatched
evaluated GT box it overlaps most (IoU >= threshold).  A detection that
finds no such box but overlaps an ignored box is dropped from the count.
Ignored boxes can absorb any number of detections.  Everything else is a
false positive.

Because a detection's outcome depends only on higher-ranked detections,
one matching pass per frame serves every score threshold of the curve.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .fusion import DetectionTable
from .geometry import GroundTruthAnnotation, iou_matrix, paired_iou

TP, FP, IGNORED = 1, 0, -1

LAMR_REFERENCE_FPPI = 10.0 ** np.linspace(-2.0, 0.0, 9)
MISS_RATE_FLOOR = 1e-10


@dataclass(frozen=True)
class OcclusionRange:
    lo: float
    hi: float
    include_lo: bool = True

    def __contains__(self, value: float) -> bool:
        above = value >= self.lo if self.include_lo else value > self.lo
        return above and value <= self.hi


@dataclass(frozen=True)
class EvalSetting:
    """Height window ``[min_height_px, max_height_px)`` plus an occlusion range.

    ``None`` leaves that side of the height window open.
    """

    name: str
    min_height_px: Optional[float] = None
    max_height_px: Optional[float] = None
    allowed_occlusion: OcclusionRange = OcclusionRange(0.0, 1.0)

    def admits(self, ann: GroundTruthAnnotation) -> bool:
        h = ann.height
        if self.min_height_px is not None and h < self.min_height_px:
            return False
        if self.max_height_px is not None and h >= self.max_height_px:
            return False
        return ann.occlusion_fraction in self.allowed_occlusion


SETTINGS = {
    s.name: s
    for s in (
        EvalSetting("Reasonable", 50, None, OcclusionRange(0.0, 0.35)),
        EvalSetting("All", 20, None, OcclusionRange(0.0, 0.80)),
        EvalSetting("Far", None, 30),
        EvalSetting("Medium", 30, 80),
        EvalSetting("Near", 80, None),
        EvalSetting("Occ.none", None, None, OcclusionRange(0.0, 0.0)),
        EvalSetting("Occ.partial", None, None, OcclusionRange(0.0, 0.35, include_lo=False)),
        EvalSetting("Occ.heavy", None, None, OcclusionRange(0.35, 0.80, include_lo=False)),
    )
}


def get_setting(name) -> EvalSetting:
    if isinstance(name, EvalSetting):
        return name
    try:
        return SETTINGS[name]
    except KeyError:
        raise ValueError(f"unknown evaluation setting {name!r}; choose from {list(SETTINGS)}") from None


def filter_ground_truth(gt: Iterable[GroundTruthAnnotation], setting) -> tuple:
    """Split annotations into (evaluated, ignored) under a setting.

    Only 'person' boxes inside the setting's window are evaluated; crowds,
    unclear identities and out-of-window people become ignore regions.
    """
    setting = get_setting(setting)
    evaluated, ignored = [], []
    for ann in gt:
        if ann.category == "person" and setting.admits(ann):
            evaluated.append(ann)
        else:
            ignored.append(ann)
    return evaluated, ignored


def _box_array(items) -> np.ndarray:
    if not items:
        return np.zeros((0, 4))
    boxes = [getattr(it, "box", it) for it in items]
    return np.array([(b.x, b.y, b.w, b.h) for b in boxes], dtype=np.float64)


def match_outcomes(
    det_boxes: np.ndarray,
    eval_boxes: np.ndarray,
    ignore_boxes: np.ndarray,
    iou_threshold: float = 0.5,
) -> np.ndarray:
    """Per-detection outcome codes (TP / FP / IGNORED); detections pre-sorted by rank."""
    n = len(det_boxes)
    outcome = np.full(n, FP, dtype=np.int8)
    if n == 0:
        return outcome
    if len(eval_boxes):
        ious = iou_matrix(det_boxes, eval_boxes)
        ious[ious < iou_threshold] = -1.0
        rows = np.flatnonzero(ious.max(axis=1) >= 0)
        if len(rows):
            taken = np.zeros(len(eval_boxes), dtype=bool)
            for i in rows.tolist():
                row = np.where(taken, -1.0, ious[i])
                j = int(row.argmax())
                if row[j] >= 0:
                    taken[j] = True
                    outcome[i] = TP
    if len(ignore_boxes):
        free = np.flatnonzero(outcome == FP)
        if len(free):
            hit = iou_matrix(det_boxes[free], ignore_boxes).max(axis=1) >= iou_threshold
            outcome[free[hit]] = IGNORED
    return outcome


def match_frame(detections, evaluated_gt, ignored_gt, iou_threshold: float = 0.5) -> tuple:
    """Greedy matching of one frame; returns ``(tp, fp, misses)``.

    ``detections`` must already be sorted by descending score, ties by id.
    """
    outcome = match_outcomes(
        _box_array(detections), _box_array(evaluated_gt), _box_array(ignored_gt), iou_threshold
    )
    tp = int(np.count_nonzero(outcome == TP))
    fp = int(np.count_nonzero(outcome == FP))
    return tp, fp, len(evaluated_gt) - tp


@dataclass(frozen=True)
class MatchResult:
    """Outcome of matching a set of frames.

    Detection arrays are grouped by frame (in ``frames`` order) and ranked
    within each frame.
    """

    frames: tuple
    frame_index: np.ndarray
    ids: tuple
    scores: np.ndarray
    outcome: np.ndarray
    n_evaluated: np.ndarray

    @classmethod
    def concat(cls, parts: Sequence["MatchResult"]) -> "MatchResult":
        offsets = np.cumsum([0] + [len(p.frames) for p in parts[:-1]])
        return cls(
            tuple(f for p in parts for f in p.frames),
            np.concatenate([p.frame_index + off for p, off in zip(parts, offsets)]),
            tuple(i for p in parts for i in p.ids),
            np.concatenate([p.scores for p in parts]),
            np.concatenate([p.outcome for p in parts]),
            np.concatenate([p.n_evaluated for p in parts]),
        )

    def frame_counts(self) -> tuple:
        """Per-frame ``(tp, fp, misses)`` over all detections."""
        n = len(self.frames)
        tp = np.bincount(self.frame_index[self.outcome == TP], minlength=n)
        fp = np.bincount(self.frame_index[self.outcome == FP], minlength=n)
        return tp, fp, self.n_evaluated - tp


@dataclass(frozen=True)
class MissRateCurve:
    fppi: np.ndarray
    miss_rate: np.ndarray
    lamr: float

    @property
    def points(self) -> list:
        return list(zip(self.fppi.tolist(), self.miss_rate.tolist()))

    def to_csv(self) -> str:
        lines = ["fppi,miss_rate"]
        lines += [f"{f!r},{m!r}" for f, m in zip(self.fppi.tolist(), self.miss_rate.tolist())]
        lines.append(f"# lamr={self.lamr!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_points(cls, points: Sequence[tuple]) -> "MissRateCurve":
        fppi = np.array([p[0] for p in points], dtype=np.float64)
        mr = np.array([p[1] for p in points], dtype=np.float64)
        if len(fppi) == 0:
            raise ValueError("curve needs at least one point")
        if np.any(np.diff(fppi) <= 0):
            raise ValueError("fppi must be strictly increasing")
        return cls(fppi, mr, compute_lamr_points(fppi, mr))

    @classmethod
    def from_csv(cls, text: str) -> "MissRateCurve":
        points = []
        lamr = None
        for line in text.splitlines():
            line = line.strip()
            if not line or line == "fppi,miss_rate":
                continue
            if line.startswith("# lamr="):
                lamr = float(line[len("# lamr="):])
                continue
            f, m = line.split(",")
            points.append((float(f), float(m)))
        curve = cls.from_points(points)
        if lamr is not None and lamr != curve.lamr:
            raise ValueError(f"stored lamr {lamr} does not match recomputed {curve.lamr}")
        return curve


def compute_lamr_points(fppi: np.ndarray, miss_rate: np.ndarray) -> float:
    fppi = np.asarray(fppi, dtype=np.float64)
    miss_rate = np.asarray(miss_rate, dtype=np.float64)
    # index of the last point with fppi <= ref; -1 means none, fall back to the first point
    idx = np.searchsorted(fppi, LAMR_REFERENCE_FPPI, side="right") - 1
    sampled = miss_rate[np.maximum(idx, 0)]
    sampled = np.maximum(sampled, MISS_RATE_FLOOR)
    return float(np.exp(np.mean(np.log(sampled))))


def compute_lamr(curve: MissRateCurve) -> float:
    """Log-average miss rate over nine FPPI points spaced evenly in [1e-2, 1e0]."""
    return compute_lamr_points(curve.fppi, curve.miss_rate)


def _segments(sorted_keys: np.ndarray, n: int) -> tuple:
    starts = np.searchsorted(sorted_keys, np.arange(n), side="left")
    stops = np.searchsorted(sorted_keys, np.arange(n), side="right")
    return starts, stops


def match_corpus(
    frames: Sequence[str],
    detections: Sequence,
    gt: Sequence[GroundTruthAnnotation],
    setting,
    iou_threshold: float = 0.5,
) -> MatchResult:
    """Vectorized :func:`match_outcomes` over many frames at once.

    IoU is computed for every same-frame (detection, GT) pair in one pass;
    the greedy loop then only visits pairs above the threshold.
    """
    setting = get_setting(setting)
    frames = tuple(frames)
    n_frames = len(frames)
    index = {f: k for k, f in enumerate(frames)}

    if not isinstance(detections, DetectionTable):
        detections = DetectionTable.from_candidates(detections)
    d_frame = np.array([index[f] for f in detections.frame_ids], dtype=np.int64)
    d_id = detections.ids
    # rank: frame, then descending score, then ascending id
    id_rank = np.empty(len(d_id), dtype=np.int64)
    id_rank[sorted(range(len(d_id)), key=d_id.__getitem__)] = np.arange(len(d_id))
    order = np.lexsort((id_rank, -detections.scores, d_frame))
    d_frame, d_score = d_frame[order], detections.scores[order]
    ids = tuple(d_id[i] for i in order.tolist())
    d_box = detections.boxes[order]

    g_frame = np.array([index[a.frame_id] for a in gt], dtype=np.int64)
    g_eval = np.array([a.category == "person" and setting.admits(a) for a in gt], dtype=bool)
    g_order = np.argsort(g_frame, kind="stable")
    g_frame, g_eval = g_frame[g_order], g_eval[g_order]
    g_box = _box_array([gt[i] for i in g_order.tolist()])

    n_det = len(d_frame)
    outcome = np.full(n_det, FP, dtype=np.int8)
    n_evaluated = np.bincount(g_frame[g_eval], minlength=n_frames).astype(np.int64)

    if n_det and len(g_frame):
        g_start, g_stop = _segments(g_frame, n_frames)
        per_det = (g_stop - g_start)[d_frame]
        pair_det = np.repeat(np.arange(n_det), per_det)
        first = np.repeat(g_start[d_frame], per_det)
        within = np.arange(len(pair_det)) - np.repeat(np.cumsum(per_det) - per_det, per_det)
        pair_gt = first + within
        iou = paired_iou(d_box[pair_det], g_box[pair_gt])
        hit = iou >= iou_threshold

        cand = hit & g_eval[pair_gt]
        if np.any(cand):
            pd, pg, pi = pair_det[cand], pair_gt[cand], iou[cand]
            # visit pairs per detection in rank order, best IoU first, lowest GT index on ties
            visit = np.lexsort((pg, -pi, pd))
            taken = np.zeros(len(g_frame), dtype=bool)
            done = -1
            for d, g in zip(pd[visit].tolist(), pg[visit].tolist()):
                if d == done or taken[g]:
                    continue
                taken[g] = True
                outcome[d] = TP
                done = d

        ign = hit & ~g_eval[pair_gt]
        if np.any(ign):
            absorbed = np.unique(pair_det[ign])
            absorbed = absorbed[outcome[absorbed] == FP]
            outcome[absorbed] = IGNORED

    return MatchResult(frames, d_frame, ids, d_score, outcome, n_evaluated)


def _match_chunk(args) -> MatchResult:
    return match_corpus(*args)


def evaluate_frames(
    detections: Iterable,
    gt: Iterable[GroundTruthAnnotation],
    setting="Reasonable",
    frames: Optional[Sequence[str]] = None,
    iou_threshold: float = 0.5,
    workers: int = 1,
) -> MatchResult:
    """Match every frame of a corpus.

    ``frames`` fixes the image set (and thus the FPPI denominator).  By
    default it is every frame id seen in either input, sorted.  With
    ``workers > 1`` contiguous frame blocks are matched in separate
    processes; the merged result is identical to the sequential one.
    """
    setting = get_setting(setting)
    if not isinstance(detections, DetectionTable):
        detections = DetectionTable.from_candidates(detections)
    gt = list(gt)
    seen = set(detections.frame_ids) | {a.frame_id for a in gt}
    if frames is None:
        frames = sorted(seen)
    else:
        frames = list(frames)
        unknown = seen - set(frames)
        if unknown:
            raise ValueError(f"inputs reference frames outside the frame list, e.g. {sorted(unknown)[0]!r}")
    if workers <= 1 or len(frames) < 2:
        return match_corpus(frames, detections, gt, setting, iou_threshold)
    size = math.ceil(len(frames) / workers)
    blocks = [frames[i:i + size] for i in range(0, len(frames), size)]
    block_of = {f: b for b, block in enumerate(blocks) for f in block}
    det_block = np.array([block_of[f] for f in detections.frame_ids], dtype=np.int64)
    gt_parts = [[] for _ in blocks]
    for a in gt:
        gt_parts[block_of[a.frame_id]].append(a)
    jobs = [
        (blocks[b], detections.take(np.flatnonzero(det_block == b)), gt_parts[b], setting, iou_threshold)
        for b in range(len(blocks))
    ]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return MatchResult.concat(list(pool.map(_match_chunk, jobs)))


def curve_from_results(result: MatchResult, thresholds: Optional[Sequence[float]] = None) -> MissRateCurve:
    """Reduce matched outcomes to a staircase FPPI/miss-rate curve.

    The curve starts at the empty detection set (FPPI 0) and adds one point
    per score threshold.  Points sharing an FPPI collapse to the lowest miss
    rate, which keeps FPPI strictly increasing.
    """
    n_frames = len(result.frames)
    if n_frames == 0:
        raise ValueError("no frames to evaluate")
    n_gt = int(result.n_evaluated.sum())
    if n_gt == 0:
        raise ValueError("no evaluated ground truth under this setting; miss rate undefined")
    order = np.argsort(-result.scores, kind="stable")
    scores = result.scores[order]
    outcome = result.outcome[order]
    cum_tp = np.cumsum(outcome == TP)
    cum_fp = np.cumsum(outcome == FP)

    if thresholds is None:
        # last index of each run of equal scores
        ends = np.flatnonzero(np.r_[scores[1:] != scores[:-1], True]) if len(scores) else np.zeros(0, int)
    else:
        t = np.unique(np.asarray(thresholds, dtype=np.float64))[::-1]
        # count of detections scoring >= t, minus one
        ends = np.searchsorted(-scores, -t, side="right") - 1
        ends = ends[ends >= 0]

    tp = np.r_[0, cum_tp[ends]]
    fp = np.r_[0, cum_fp[ends]]
    fppi = fp / n_frames
    miss = 1.0 - tp / n_gt
    # collapse equal-FPPI runs onto their last (lowest miss-rate) point
    last = np.r_[fppi[1:] != fppi[:-1], True]
    fppi, miss = fppi[last], miss[last]
    return MissRateCurve(fppi, miss, compute_lamr_points(fppi, miss))


def compute_curve(
    detections: Iterable,
    gt: Iterable[GroundTruthAnnotation],
    setting="Reasonable",
    thresholds: Optional[Sequence[float]] = None,
    frames: Optional[Sequence[str]] = None,
    iou_threshold: float = 0.5,
    workers: int = 1,
) -> MissRateCurve:
    """FPPI/miss-rate curve and L-AMR of scored detections under one setting."""
    result = evaluate_frames(detections, gt, setting, frames, iou_threshold, workers)
    return curve_from_results(result, thresholds)
