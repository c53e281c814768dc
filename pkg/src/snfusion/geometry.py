"""Rectangle arithmetic, Jaccard overlap, candidate labeling and mask coverage.

Boxes are ``(x, y, w, h)`` in pixels with ``(x, y)`` the top-left corner.
All functions here are pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

CATEGORIES = ("person", "people", "person_unclear")

POSITIVE_IOU = 0.5


@dataclass(frozen=True)
class BoundingBox:
    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise ValueError(f"box must have positive width and height, got w={self.w}, h={self.h}")
        if not all(math.isfinite(v) for v in (self.x, self.y, self.w, self.h)):
            raise ValueError("box coordinates must be finite")

    @property
    def x2(self) -> float:
        return self.x + self.w

    @property
    def y2(self) -> float:
        return self.y + self.h

    @property
    def area(self) -> float:
        return self.w * self.h

    def as_list(self) -> list:
        return [self.x, self.y, self.w, self.h]

    @classmethod
    def from_corners(cls, x1: float, y1: float, x2: float, y2: float) -> "BoundingBox":
        return cls(x1, y1, x2 - x1, y2 - y1)


def intersection_area(a: BoundingBox, b: BoundingBox) -> float:
    iw = min(a.x2, b.x2) - max(a.x, b.x)
    ih = min(a.y2, b.y2) - max(a.y, b.y)
    if iw <= 0 or ih <= 0:
        return 0.0
    return iw * ih


def jaccard(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union of two boxes.

    Symmetric by construction: the union is computed as
    ``area(a) + area(b) - inter`` with the two areas summed in a fixed
    (sorted) order so that swapping the arguments cannot change rounding.
    """
    inter = intersection_area(a, b)
    if inter == 0.0:
        return 0.0
    if a == b:
        return 1.0
    lo, hi = sorted((a.area, b.area))
    union = (lo + hi) - inter
    return min(inter / union, 1.0)


def paired_iou(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Elementwise IoU of broadcastable ``(..., 4)`` xywh arrays.

    Same arithmetic, in the same order, as :func:`jaccard`.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    ax, ay, aw, ah = np.moveaxis(a, -1, 0)
    bx, by, bw, bh = np.moveaxis(b, -1, 0)
    iw = np.minimum(ax + aw, bx + bw) - np.maximum(ax, bx)
    ih = np.minimum(ay + ah, by + bh) - np.maximum(ay, by)
    inter = np.where((iw > 0) & (ih > 0), iw * ih, 0.0)
    area_a = aw * ah
    area_b = bw * bh
    union = (np.minimum(area_a, area_b) + np.maximum(area_a, area_b)) - inter
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(inter > 0, inter / union, 0.0)
    same = (ax == bx) & (ay == by) & (aw == bw) & (ah == bh)
    return np.where(same, 1.0, np.minimum(out, 1.0))


def iou_matrix(boxes_a: np.ndarray, boxes_b: np.ndarray) -> np.ndarray:
    """Pairwise IoU between ``(N, 4)`` and ``(K, 4)`` arrays of xywh boxes."""
    a = np.asarray(boxes_a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(boxes_b, dtype=np.float64).reshape(-1, 4)
    return paired_iou(a[:, None, :], b[None, :, :])


@dataclass(frozen=True)
class GroundTruthAnnotation:
    """A labeled pedestrian box.

    ``occlusion`` is only consulted when ``visible_box`` is absent; it lets
    data without visible-region boxes still carry an occlusion level.
    """

    frame_id: str
    box: BoundingBox
    category: str = "person"
    visible_box: Optional[BoundingBox] = None
    occlusion: Optional[float] = None

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown category {self.category!r}; expected one of {CATEGORIES}")
        if self.visible_box is not None and intersection_area(self.box, self.visible_box) <= 0:
            raise ValueError("visible_box does not overlap box")
        if self.occlusion is not None and not 0.0 <= self.occlusion <= 1.0:
            raise ValueError(f"occlusion must lie in [0, 1], got {self.occlusion}")

    @property
    def height(self) -> float:
        return self.box.h

    @property
    def occlusion_fraction(self) -> float:
        if self.visible_box is not None:
            visible = intersection_area(self.box, self.visible_box)
            return min(max(1.0 - visible / self.box.area, 0.0), 1.0)
        if self.occlusion is not None:
            return float(self.occlusion)
        return 0.0


@dataclass(frozen=True)
class SegmentationMask:
    """Binary pedestrian/background raster; ``pixels[row, col]``."""

    frame_id: str
    width: int
    height: int
    pixels: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("mask dimensions must be positive")
        px = np.asarray(self.pixels)
        if px.shape != (self.height, self.width):
            raise ValueError(
                f"raster shape {px.shape} does not match declared {self.height}x{self.width} (rows x cols)"
            )
        px = px.astype(bool, copy=True)
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    def __eq__(self, other):
        if not isinstance(other, SegmentationMask):
            return NotImplemented
        return (
            self.frame_id == other.frame_id
            and self.width == other.width
            and self.height == other.height
            and np.array_equal(self.pixels, other.pixels)
        )

    __hash__ = None


def label_candidates(
    candidates: Sequence[BoundingBox], gt: Iterable[GroundTruthAnnotation]
) -> list:
    """1 for every candidate whose best Jaccard overlap with a GT box is > 0.5, else 0."""
    gt_boxes = [g.box for g in gt]
    if not gt_boxes or not candidates:
        return [0] * len(candidates)
    ious = iou_matrix([c.as_list() for c in candidates], [g.as_list() for g in gt_boxes])
    return [int(v) for v in (ious.max(axis=1) > POSITIVE_IOU)]


def _pixel_span(lo: float, hi: float, limit: int) -> tuple:
    # pixel k (center k + 0.5) is inside [lo, hi) iff ceil(lo - 0.5) <= k < ceil(hi - 0.5)
    start = max(math.ceil(lo - 0.5), 0)
    stop = min(math.ceil(hi - 0.5), limit)
    return start, max(stop, start)


def box_pixel_slices(box: BoundingBox, width: int, height: int) -> tuple:
    """Row and column slices of the raster pixels whose centers fall inside ``box``."""
    c0, c1 = _pixel_span(box.x, box.x2, width)
    r0, r1 = _pixel_span(box.y, box.y2, height)
    return slice(r0, r1), slice(c0, c1)


def mask_coverage(box: BoundingBox, mask: SegmentationMask, frame_id: Optional[str] = None) -> float:
    """Fraction of the box's pixels that the mask marks as pedestrian.

    A pixel belongs to the box when its center lies in the half-open
    rectangle ``[x, x + w) x [y, y + h)``.  The box is clipped to the raster
    first, so both counts cover only in-raster pixels; a box with no pixel
    centers inside the raster has coverage 0.
    """
    if frame_id is not None and frame_id != mask.frame_id:
        raise ValueError(f"mask belongs to frame {mask.frame_id!r}, not {frame_id!r}")
    rows, cols = box_pixel_slices(box, mask.width, mask.height)
    total = (rows.stop - rows.start) * (cols.stop - cols.start)
    if total == 0:
        return 0.0
    return int(np.count_nonzero(mask.pixels[rows, cols])) / total
