"""Soft-rejection fusion of detector candidates with classifier and segmentation votes.

Each classifier probability ``p`` becomes a multiplicative factor
``max(p / a_c, b_c)``; a candidate's fused score is its generator score
times the product of all factors.  A segmentation mask contributes one more
factor, ``max(coverage * a_ss, b_ss)``, unless the mask already covers more
than ``ss_accept_ratio`` of the box.  Nothing is ever removed by soft fusion.

Factors are always applied in ascending classifier-id order, left to right,
so the scalar path, the array path and any parallel schedule produce
bit-identical scores.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Mapping, Optional, Sequence

import numpy as np

from .geometry import BoundingBox, iou_matrix

SS_TAG = "ss"
HARD_SS_COVERAGE = 0.05


@dataclass(frozen=True)
class FusionParams:
    a_c: float = 0.7
    b_c: float = 0.1
    a_ss: float = 4.0
    b_ss: float = 0.35
    ss_accept_ratio: float = 0.2
    collect_min_score: float = 0.01
    collect_min_height_px: float = 40.0

    def __post_init__(self):
        if not 0 < self.a_c <= 1:
            raise ValueError(f"a_c must be in (0, 1], got {self.a_c}")
        if not 0 < self.b_c <= 1:
            raise ValueError(f"b_c must be in (0, 1], got {self.b_c}")
        if not self.a_ss > 0:
            raise ValueError(f"a_ss must be positive, got {self.a_ss}")
        if not 0 < self.b_ss <= 1:
            raise ValueError(f"b_ss must be in (0, 1], got {self.b_ss}")
        if not 0 < self.ss_accept_ratio < 1:
            raise ValueError(f"ss_accept_ratio must be in (0, 1), got {self.ss_accept_ratio}")


@dataclass(frozen=True)
class Candidate:
    """One scored detection hypothesis.

    ``applied_factors`` is the ordered history of ``(source, factor)`` pairs;
    ``score_fused`` always equals ``score_generator`` multiplied by them in order.
    """

    id: str
    frame_id: str
    box: BoundingBox
    score_generator: float
    score_fused: float = None
    applied_factors: tuple = field(default=())

    def __post_init__(self):
        if not 0.0 <= self.score_generator <= 1.0:
            raise ValueError(f"candidate {self.id}: generator score {self.score_generator} outside [0, 1]")
        if self.score_fused is None:
            object.__setattr__(self, "score_fused", replay_factors(self.score_generator, self.applied_factors))

    def with_factors(self, factors: Iterable) -> "Candidate":
        applied = self.applied_factors + tuple((str(tag), float(f)) for tag, f in factors)
        score = self.score_fused
        for _, f in applied[len(self.applied_factors):]:
            score *= f
        return replace(self, score_fused=score, applied_factors=applied)


def replay_factors(score: float, factors: Iterable) -> float:
    for _, f in factors:
        score *= f
    return score


@dataclass(frozen=True, eq=False)
class DetectionTable:
    """Columnar form of a candidate list for bulk fusion and evaluation.

    ``boxes`` is ``(N, 4)`` as ``x, y, w, h``; ``scores`` holds the current
    (fused) scores.  No per-candidate factor history is kept.
    """

    ids: tuple
    frame_ids: tuple
    boxes: np.ndarray
    scores: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "ids", tuple(self.ids))
        object.__setattr__(self, "frame_ids", tuple(self.frame_ids))
        boxes = np.asarray(self.boxes, dtype=np.float64).reshape(-1, 4)
        scores = np.asarray(self.scores, dtype=np.float64).reshape(-1)
        n = len(self.ids)
        if not (len(self.frame_ids) == len(boxes) == len(scores) == n):
            raise ValueError("ids, frame_ids, boxes and scores must have the same length")
        if not np.all((boxes[:, 2] > 0) & (boxes[:, 3] > 0)):
            raise ValueError("box widths and heights must be positive")
        if len(set(self.ids)) != n:
            raise ValueError("candidate ids must be unique")
        object.__setattr__(self, "boxes", boxes)
        object.__setattr__(self, "scores", scores)

    @classmethod
    def from_candidates(cls, candidates: Iterable[Candidate]) -> "DetectionTable":
        cs = list(candidates)
        boxes = [c.box for c in cs]
        return cls(
            tuple(c.id for c in cs),
            tuple(c.frame_id for c in cs),
            np.array([(b.x, b.y, b.w, b.h) for b in boxes], dtype=np.float64).reshape(-1, 4),
            np.array([c.score_fused for c in cs], dtype=np.float64),
        )

    def __len__(self) -> int:
        return len(self.ids)

    def take(self, index) -> "DetectionTable":
        index = np.asarray(index, dtype=np.int64)
        return DetectionTable(
            tuple(self.ids[i] for i in index.tolist()),
            tuple(self.frame_ids[i] for i in index.tolist()),
            self.boxes[index],
            self.scores[index],
        )


@dataclass(frozen=True)
class ClassifierVerdict:
    candidate_id: str
    classifier_id: str
    probability: float

    def __post_init__(self):
        if not 0.0 <= self.probability <= 1.0:
            raise ValueError(
                f"probability {self.probability} from {self.classifier_id} for {self.candidate_id} outside [0, 1]"
            )


def _check_probability(p: float) -> None:
    if not (0.0 <= p <= 1.0):
        raise ValueError(f"probability {p} outside [0, 1]")


def scaling_factor(p: float, params: FusionParams = FusionParams()) -> float:
    """Confidence scaling factor ``max(p / a_c, b_c)`` for one classifier vote."""
    _check_probability(p)
    return max(p / params.a_c, params.b_c)


def ss_factor(coverage: float, params: FusionParams = FusionParams()) -> float:
    if not (0.0 <= coverage <= 1.0):
        raise ValueError(f"coverage {coverage} outside [0, 1]")
    if coverage > params.ss_accept_ratio:
        return 1.0
    return max(coverage * params.a_ss, params.b_ss)


def _verdict_map(candidate_id: str, verdicts: Iterable[ClassifierVerdict]) -> dict:
    by_classifier = {}
    for v in verdicts:
        if v.candidate_id != candidate_id:
            raise ValueError(f"verdict for {v.candidate_id!r} passed with candidate {candidate_id!r}")
        if v.classifier_id in by_classifier:
            raise ValueError(f"duplicate verdict from classifier {v.classifier_id!r} for {candidate_id!r}")
        by_classifier[v.classifier_id] = v.probability
    return by_classifier


def _resolve_probabilities(
    candidate_id: str,
    verdicts: Iterable[ClassifierVerdict],
    classifiers: Optional[Sequence[str]],
    strict: bool,
) -> list:
    """Sorted ``(classifier_id, p)`` pairs; ``p`` is None for a lenient miss."""
    probs = _verdict_map(candidate_id, verdicts)
    if classifiers is None:
        return sorted(probs.items())
    unknown = set(probs) - set(classifiers)
    if unknown:
        raise ValueError(f"verdicts from undeclared classifiers {sorted(unknown)} for {candidate_id!r}")
    out = []
    for cid in sorted(set(classifiers)):
        if cid not in probs and strict:
            raise ValueError(f"missing verdict from classifier {cid!r} for candidate {candidate_id!r}")
        out.append((cid, probs.get(cid)))
    return out


def fuse_classifiers(
    candidate: Candidate,
    verdicts: Iterable[ClassifierVerdict],
    params: FusionParams = FusionParams(),
    classifiers: Optional[Sequence[str]] = None,
    strict: bool = True,
) -> Candidate:
    """Scale the candidate's score by one factor per classifier verdict.

    ``classifiers`` declares the expected voters.  A declared classifier with
    no verdict raises in strict mode and contributes factor 1 otherwise.
    """
    factors = []
    for cid, p in _resolve_probabilities(candidate.id, verdicts, classifiers, strict):
        factors.append((cid, 1.0 if p is None else scaling_factor(p, params)))
    return candidate.with_factors(factors)


def fuse_segmentation(candidate: Candidate, coverage: float, params: FusionParams = FusionParams()) -> Candidate:
    return candidate.with_factors([(SS_TAG, ss_factor(coverage, params))])


def hard_reject(
    candidates: Sequence[Candidate],
    verdicts: Iterable[ClassifierVerdict],
    threshold: float = 0.5,
    coverages: Optional[Mapping[str, float]] = None,
    classifiers: Optional[Sequence[str]] = None,
    strict: bool = True,
    ss_threshold: float = HARD_SS_COVERAGE,
) -> list:
    """Binary-classification baseline: drop a candidate on any single negative vote.

    A candidate survives iff every classifier probability is >= ``threshold``
    and, when ``coverages`` is given, its mask coverage is >= ``ss_threshold``.
    Survivors keep their scores.
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must be in (0, 1), got {threshold}")
    grouped = group_verdicts(verdicts)
    kept = []
    for c in candidates:
        probs = _resolve_probabilities(c.id, grouped.get(c.id, ()), classifiers, strict)
        if any(p is not None and p < threshold for _, p in probs):
            continue
        if coverages is not None and coverages.get(c.id, 0.0) < ss_threshold:
            continue
        kept.append(c)
    return kept


def collect_for_classification(candidates: Iterable[Candidate], params: FusionParams = FusionParams()) -> list:
    """Candidates scoring above ``collect_min_score`` and taller than ``collect_min_height_px``."""
    return [
        c for c in candidates
        if c.score_generator > params.collect_min_score and c.box.h > params.collect_min_height_px
    ]


def ranking_key(c: Candidate) -> tuple:
    return (-c.score_fused, c.id)


def nms(candidates: Sequence[Candidate], iou_threshold: float) -> list:
    """Greedy suppression by fused score (ties: ascending id) within one frame."""
    if not 0.0 < iou_threshold < 1.0:
        raise ValueError(f"iou_threshold must be in (0, 1), got {iou_threshold}")
    order = sorted(candidates, key=ranking_key)
    if len(order) <= 1:
        return list(order)
    ious = iou_matrix([c.box.as_list() for c in order], [c.box.as_list() for c in order])
    alive = np.ones(len(order), dtype=bool)
    kept = []
    for i in range(len(order)):
        if not alive[i]:
            continue
        kept.append(order[i])
        alive[i + 1:] &= ious[i, i + 1:] <= iou_threshold
    return kept


def group_verdicts(verdicts: Iterable[ClassifierVerdict]) -> dict:
    grouped = {}
    for v in verdicts:
        grouped.setdefault(v.candidate_id, []).append(v)
    return grouped


def _probability_matrix(ids: Sequence[str], verdicts, classifiers) -> np.ndarray:
    """``(N, M)`` votes with NaN where a classifier did not vote."""
    row = {}
    for k, cid in enumerate(ids):
        if row.setdefault(cid, k) != k:
            raise ValueError(f"duplicate candidate id {cid!r}")
    col = {name: m for m, name in enumerate(classifiers)}
    try:
        rows = [row[v.candidate_id] for v in verdicts]
    except KeyError as exc:
        raise ValueError(f"verdicts reference unknown candidates, e.g. {exc.args[0]!r}") from None
    try:
        cols = [col[v.classifier_id] for v in verdicts]
    except KeyError as exc:
        raise ValueError(f"verdicts from undeclared classifiers [{exc.args[0]!r}]") from None
    vals = [v.probability for v in verdicts]
    probs = np.full((len(row), len(col)), np.nan)
    if rows:
        flat = np.asarray(rows, dtype=np.int64) * len(col) + np.asarray(cols, dtype=np.int64)
        uniq, counts = np.unique(flat, return_counts=True)
        if np.any(counts > 1):
            i, j = divmod(int(uniq[np.argmax(counts > 1)]), len(col))
            raise ValueError(f"duplicate verdict from classifier {classifiers[j]!r} for {ids[i]!r}")
        probs.ravel()[flat] = vals
    return probs


def fuse_all(
    candidates: Sequence[Candidate],
    verdicts: Iterable[ClassifierVerdict],
    params: FusionParams = FusionParams(),
    classifiers: Optional[Sequence[str]] = None,
    strict: bool = True,
    skip: Optional[Callable[[Candidate], bool]] = None,
) -> list:
    """Apply :func:`fuse_classifiers` to a candidate pool.

    ``skip(c)`` returning True leaves a candidate unscored (no factors), the
    way a size pre-filter avoids classifier calls without dropping boxes.
    The pool is scored as one matrix; results match the per-candidate call
    bit for bit.
    """
    candidates = list(candidates)
    verdicts = list(verdicts)
    if classifiers is None:
        classifiers = {v.classifier_id for v in verdicts}
    classifiers = sorted(set(classifiers))
    probs = _probability_matrix([c.id for c in candidates], verdicts, classifiers)
    active = np.array([skip is None or not skip(c) for c in candidates], dtype=bool)
    if strict:
        missing = np.isnan(probs) & active[:, None]
        if missing.any():
            i, j = np.argwhere(missing)[0]
            raise ValueError(f"missing verdict from classifier {classifiers[j]!r} for candidate {candidates[i].id!r}")
    factors = scaling_factors(probs, params)
    fused = np.array([c.score_fused for c in candidates], dtype=np.float64)
    for m in range(factors.shape[1]):
        fused *= factors[:, m]
    out = []
    for c, on, score, row in zip(candidates, active.tolist(), fused.tolist(), factors.tolist()):
        if not on:
            out.append(c)
            continue
        applied = c.applied_factors + tuple(zip(classifiers, row))
        out.append(Candidate(c.id, c.frame_id, c.box, c.score_generator, score, applied))
    return out


def fuse_table(
    table: DetectionTable,
    verdicts: Iterable[ClassifierVerdict],
    params: FusionParams = FusionParams(),
    classifiers: Optional[Sequence[str]] = None,
    strict: bool = True,
) -> DetectionTable:
    """:func:`fuse_all` on a :class:`DetectionTable`; scores match it bit for bit."""
    verdicts = list(verdicts)
    if classifiers is None:
        classifiers = {v.classifier_id for v in verdicts}
    classifiers = sorted(set(classifiers))
    probs = _probability_matrix(table.ids, verdicts, classifiers)
    if strict and np.isnan(probs).any():
        i, j = np.argwhere(np.isnan(probs))[0]
        raise ValueError(f"missing verdict from classifier {classifiers[j]!r} for candidate {table.ids[i]!r}")
    return replace(table, scores=fuse_scores(table.scores, probs, params))


VerdictProvider = Callable[[Sequence[Candidate]], Sequence[ClassifierVerdict]]


def gather_verdicts(
    providers: Sequence[VerdictProvider],
    candidates: Sequence[Candidate],
    max_workers: Optional[int] = None,
) -> list:
    """Run classifier providers concurrently and merge their verdicts.

    The merged list is concatenated in provider order, so the result does
    not depend on which provider finishes first.
    """
    if not providers:
        return []
    workers = max_workers or len(providers)
    if workers == 1:
        results = [list(p(candidates)) for p in providers]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = [list(r) for r in pool.map(lambda p: p(candidates), providers)]
    return [v for r in results for v in r]


def scaling_factors(probs: np.ndarray, params: FusionParams = FusionParams()) -> np.ndarray:
    """Vectorized :func:`scaling_factor`; NaN entries (missing votes) map to 1."""
    probs = np.asarray(probs, dtype=np.float64)
    present = ~np.isnan(probs)
    if np.any((probs[present] < 0) | (probs[present] > 1)):
        raise ValueError("probabilities outside [0, 1]")
    factors = np.maximum(probs / params.a_c, params.b_c)
    return np.where(present, factors, 1.0)


def fuse_scores(
    scores: np.ndarray,
    probs: np.ndarray,
    params: FusionParams = FusionParams(),
    coverage: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Array form of the fusion: ``scores`` is ``(N,)``, ``probs`` is ``(N, M)``.

    Columns of ``probs`` must already be in ascending classifier-id order to
    match :func:`fuse_classifiers` bit for bit.
    """
    fused = np.array(scores, dtype=np.float64, copy=True)
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim == 1:
        probs = probs[:, None]
    factors = scaling_factors(probs, params)
    for m in range(factors.shape[1]):
        fused *= factors[:, m]
    if coverage is not None:
        cov = np.asarray(coverage, dtype=np.float64)
        if np.any((cov < 0) | (cov > 1)):
            raise ValueError("coverage outside [0, 1]")
        ss = np.where(cov > params.ss_accept_ratio, 1.0, np.maximum(cov * params.a_ss, params.b_ss))
        fused *= ss
    return fused


def min_fused_score(score: float, n_classifiers: int, params: FusionParams = FusionParams(), with_ss: bool = True) -> float:
    """Lower bound on a soft-fused score; positive whenever ``score`` is."""
    bound = score * params.b_c ** n_classifiers
    return bound * params.b_ss if with_ss else bound
