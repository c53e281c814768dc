import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from snfusion.geometry import (
    BoundingBox,
    GroundTruthAnnotation,
    SegmentationMask,
    iou_matrix,
    jaccard,
    label_candidates,
    mask_coverage,
)


def unit_cells(box):
    """Integer box as the set of unit cells it covers."""
    return {(i, j) for i in range(int(box.x), int(box.x2)) for j in range(int(box.y), int(box.y2))}


def cell_iou(a, b):
    ca, cb = unit_cells(a), unit_cells(b)
    return len(ca & cb) / len(ca | cb)


def brute_coverage(box, mask):
    inside = total = 0
    for r in range(mask.height):
        for c in range(mask.width):
            cx, cy = c + 0.5, r + 0.5
            if box.x <= cx < box.x2 and box.y <= cy < box.y2:
                total += 1
                inside += bool(mask.pixels[r, c])
    return inside / total if total else 0.0


int_boxes = st.builds(
    BoundingBox,
    st.integers(-10, 10),
    st.integers(-10, 10),
    st.integers(1, 12),
    st.integers(1, 12),
)

real_boxes = st.builds(
    BoundingBox,
    st.floats(-500, 500),
    st.floats(-500, 500),
    st.floats(0.01, 400),
    st.floats(0.01, 400),
)


class TestBoundingBox:
    @pytest.mark.parametrize("w,h", [(0, 1), (1, 0), (-1, 2), (float("nan"), 1)])
    def test_rejects_degenerate(self, w, h):
        with pytest.raises(ValueError):
            BoundingBox(0, 0, w, h)

    def test_area_and_corners(self):
        b = BoundingBox(1, 2, 3, 4)
        assert (b.x2, b.y2, b.area) == (4, 6, 12)
        assert BoundingBox.from_corners(1, 2, 4, 6) == b


class TestJaccard:
    def test_identical(self):
        b = BoundingBox(0.1, 0.7, 3.3, 9.1)
        assert jaccard(b, b) == 1.0

    def test_disjoint(self):
        assert jaccard(BoundingBox(0, 0, 1, 1), BoundingBox(5, 5, 1, 1)) == 0.0

    def test_touching_edges_is_zero(self):
        assert jaccard(BoundingBox(0, 0, 1, 1), BoundingBox(1, 0, 1, 1)) == 0.0

    def test_offset_squares(self):
        a, b = BoundingBox(0, 0, 2, 2), BoundingBox(1, 1, 2, 2)
        expected = cell_iou(a, b)
        assert expected == pytest.approx(1 / 7, abs=1e-15)
        assert jaccard(a, b) == pytest.approx(expected, abs=1e-15)

    @given(int_boxes, int_boxes)
    def test_matches_cell_count_oracle(self, a, b):
        assert jaccard(a, b) == pytest.approx(cell_iou(a, b), abs=1e-12)

    @given(real_boxes, real_boxes)
    def test_symmetric_and_bounded(self, a, b):
        v = jaccard(a, b)
        assert v == jaccard(b, a)
        assert 0.0 <= v <= 1.0

    @given(int_boxes, int_boxes)
    def test_one_iff_identical(self, a, b):
        assert (jaccard(a, b) == 1.0) == (a == b)

    @given(st.lists(real_boxes, min_size=1, max_size=5), st.lists(real_boxes, min_size=1, max_size=5))
    @settings(max_examples=50)
    def test_matrix_agrees_with_scalar(self, xs, ys):
        m = iou_matrix([b.as_list() for b in xs], [b.as_list() for b in ys])
        for (i, a), (j, b) in itertools.product(enumerate(xs), enumerate(ys)):
            assert m[i, j] == jaccard(a, b)


def person(box, frame="f0", **kw):
    return GroundTruthAnnotation(frame, box, "person", **kw)


class TestLabelCandidates:
    def test_equal_box_positive(self):
        b = BoundingBox(10, 10, 20, 50)
        assert label_candidates([b], [person(b)]) == [1]

    def test_exactly_half_is_negative(self):
        # candidate covers exactly half of the GT and lies inside it: IoU = 0.5
        gt = BoundingBox(0, 0, 4, 2)
        cand = BoundingBox(0, 0, 2, 2)
        assert jaccard(cand, gt) == 0.5
        assert label_candidates([cand], [person(gt)]) == [0]

    def test_low_overlap_negative(self):
        assert label_candidates([BoundingBox(0, 0, 2, 2)], [person(BoundingBox(1, 1, 2, 2))]) == [0]

    def test_empty_gt(self):
        assert label_candidates([BoundingBox(0, 0, 1, 1)] * 3, []) == [0, 0, 0]

    @given(st.lists(int_boxes, max_size=6), st.lists(int_boxes, max_size=4), st.lists(int_boxes, max_size=3))
    def test_more_gt_never_unlabels(self, cands, gt, extra):
        before = label_candidates(cands, [person(b) for b in gt])
        after = label_candidates(cands, [person(b) for b in gt + extra])
        assert all(a >= b for a, b in zip(after, before))


class TestGroundTruth:
    def test_occlusion_from_visible_box(self):
        ann = person(BoundingBox(0, 0, 10, 40), visible_box=BoundingBox(0, 0, 10, 20))
        assert ann.occlusion_fraction == 0.5

    def test_explicit_occlusion_used_without_visible_box(self):
        assert person(BoundingBox(0, 0, 10, 40), occlusion=0.3).occlusion_fraction == 0.3

    def test_default_unoccluded(self):
        assert person(BoundingBox(0, 0, 10, 40)).occlusion_fraction == 0.0

    def test_visible_box_must_overlap(self):
        with pytest.raises(ValueError):
            person(BoundingBox(0, 0, 10, 40), visible_box=BoundingBox(50, 50, 5, 5))

    def test_unknown_category(self):
        with pytest.raises(ValueError):
            GroundTruthAnnotation("f0", BoundingBox(0, 0, 1, 1), "rider")


def mask_from(rows, frame="f0"):
    px = np.array(rows, dtype=bool)
    return SegmentationMask(frame, px.shape[1], px.shape[0], px)


class TestMaskCoverage:
    def test_all_ones(self):
        m = mask_from(np.ones((8, 8)))
        assert mask_coverage(BoundingBox(1.2, 2.7, 3.1, 4.0), m) == 1.0

    def test_all_zeros(self):
        m = mask_from(np.zeros((8, 8)))
        assert mask_coverage(BoundingBox(1, 1, 3, 3), m) == 0.0

    def test_quarter_block(self):
        px = np.zeros((4, 4))
        px[1:3, 1:3] = 1
        m = mask_from(px)
        box = BoundingBox(0, 0, 4, 4)
        assert brute_coverage(box, m) == 0.25
        assert mask_coverage(box, m) == 0.25

    def test_box_outside_raster(self):
        m = mask_from(np.ones((4, 4)))
        assert mask_coverage(BoundingBox(10, 10, 3, 3), m) == 0.0
        assert mask_coverage(BoundingBox(-10, -10, 3, 3), m) == 0.0

    def test_box_clipped_to_raster(self):
        px = np.zeros((4, 4))
        px[:, :2] = 1
        m = mask_from(px)
        # only columns 2..3 are inside the raster part of this box
        assert mask_coverage(BoundingBox(2, 0, 10, 4), m) == 0.0
        assert mask_coverage(BoundingBox(-5, 0, 7, 4), m) == 1.0

    def test_frame_mismatch(self):
        with pytest.raises(ValueError):
            mask_coverage(BoundingBox(0, 0, 1, 1), mask_from(np.ones((2, 2)), "f0"), frame_id="f1")

    def test_raster_shape_checked(self):
        with pytest.raises(ValueError):
            SegmentationMask("f0", 3, 2, np.zeros((3, 2)))

    @given(
        st.integers(0, 2**32 - 1),
        st.floats(-3, 12), st.floats(-3, 12), st.floats(0.1, 12), st.floats(0.1, 12),
    )
    @settings(max_examples=60)
    def test_matches_pixel_enumeration(self, seed, x, y, w, h):
        px = np.random.default_rng(seed).random((9, 11)) < 0.4
        m = mask_from(px)
        box = BoundingBox(x, y, w, h)
        got = mask_coverage(box, m)
        assert 0.0 <= got <= 1.0
        assert got == pytest.approx(brute_coverage(box, m), abs=1e-12)

    @given(st.integers(0, 2**32 - 1), st.integers(0, 6), st.integers(1, 6), st.integers(1, 5), st.integers(1, 5))
    @settings(max_examples=60)
    def test_disjoint_split_is_weighted_mean(self, seed, x, w1, w2, h):
        px = np.random.default_rng(seed).random((8, 20)) < 0.5
        m = mask_from(px)
        left = BoundingBox(x, 1, w1, h)
        right = BoundingBox(x + w1, 1, w2, h)
        union = BoundingBox(x, 1, w1 + w2, h)
        n1, n2 = w1 * h, w2 * h
        combined = (n1 * mask_coverage(left, m) + n2 * mask_coverage(right, m)) / (n1 + n2)
        assert mask_coverage(union, m) == pytest.approx(combined, abs=1e-12)
