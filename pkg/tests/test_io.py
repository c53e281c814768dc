import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from snfusion.fusion import Candidate, ClassifierVerdict, fuse_classifiers, fuse_segmentation
from snfusion.geometry import BoundingBox, GroundTruthAnnotation, SegmentationMask
from snfusion.io import (
    FormatError,
    read_annotations,
    read_detections,
    read_frames,
    read_mask,
    read_masks,
    read_verdicts,
    write_annotations,
    write_detections,
    write_frames,
    write_mask,
    write_verdicts,
)


def lines(tmp_path, name, rows):
    path = tmp_path / name
    path.write_text("".join((r if isinstance(r, str) else json.dumps(r)) + "\n" for r in rows))
    return path


class TestDetections:
    def test_single(self, tmp_path):
        p = lines(tmp_path, "d.jsonl", ['{"id":"c1","frame":"f0","bbox":[10,10,20,50],"score":0.9}'])
        (c,) = read_detections(p)
        assert (c.id, c.frame_id, c.box.h, c.score_generator, c.score_fused) == ("c1", "f0", 50.0, 0.9, 0.9)

    def test_empty(self, tmp_path):
        assert read_detections(lines(tmp_path, "d.jsonl", [])) == []

    def test_score_out_of_range_names_line(self, tmp_path):
        p = lines(tmp_path, "d.jsonl", [
            {"id": "a", "frame": "f", "bbox": [0, 0, 1, 1], "score": 0.5},
            {"id": "b", "frame": "f", "bbox": [0, 0, 1, 1], "score": 1.5},
        ])
        with pytest.raises(FormatError) as err:
            read_detections(p)
        assert err.value.line == 2
        assert str(err.value).startswith(f"{p}:2:")

    def test_duplicate_id(self, tmp_path):
        row = {"id": "a", "frame": "f", "bbox": [0, 0, 1, 1], "score": 0.5}
        with pytest.raises(FormatError, match=":2: duplicate"):
            read_detections(lines(tmp_path, "d.jsonl", [row, row]))

    @pytest.mark.parametrize("bad", [
        "{not json",
        "[1, 2]",
        '{"id":"a","frame":"f","bbox":[0,0,1],"score":0.5}',
        '{"id":"a","frame":"f","bbox":[0,0,0,1],"score":0.5}',
        '{"id":"a","frame":"f","bbox":[0,0,1,1]}',
        '{"id":"a","frame":"f","bbox":[0,0,1,1],"score":"high"}',
        '{"id":"a","frame":"f","bbox":[0,0,1,1],"score":0.5,"score_fused":0.2}',
    ])
    def test_malformed(self, tmp_path, bad):
        with pytest.raises(FormatError, match=":3:"):
            read_detections(lines(tmp_path, "d.jsonl", [
                {"id": "x", "frame": "f", "bbox": [0, 0, 1, 1], "score": 0.5}, "", bad,
            ]))

    def test_round_trip_with_factors(self, tmp_path):
        c = Candidate("c1", "f0", BoundingBox(0.1, 2.3, 17.7, 43.1), 0.8123456789)
        c = fuse_classifiers(c, [ClassifierVerdict("c1", "m0", 0.33), ClassifierVerdict("c1", "m1", 0.91)])
        c = fuse_segmentation(c, 0.07)
        plain = Candidate("c2", "f1", BoundingBox(5, 5, 10, 30), 0.25)
        write_detections(tmp_path / "o.jsonl", [c, plain])
        assert read_detections(tmp_path / "o.jsonl") == [c, plain]
        rec = json.loads((tmp_path / "o.jsonl").read_text().splitlines()[0])
        assert rec["score_fused"] == float(f"{c.score_fused:.9g}")

    @given(st.lists(st.tuples(
        st.floats(-1e4, 1e4), st.floats(-1e4, 1e4), st.floats(1e-3, 1e4), st.floats(1e-3, 1e4), st.floats(0, 1),
    ), max_size=8))
    @settings(max_examples=40)
    def test_round_trip(self, tmp_path_factory, rows):
        path = tmp_path_factory.mktemp("rt") / "d.jsonl"
        cs = [Candidate(f"c{k}", f"f{k % 3}", BoundingBox(x, y, w, h), s) for k, (x, y, w, h, s) in enumerate(rows)]
        write_detections(path, cs)
        assert read_detections(path) == cs


class TestAnnotations:
    def test_visible_equal_box(self, tmp_path):
        p = lines(tmp_path, "a.jsonl", [{"frame": "f", "bbox": [0, 0, 20, 50], "category": "person", "visible_bbox": [0, 0, 20, 50]}])
        assert read_annotations(p)[0].occlusion_fraction == 0.0

    def test_visible_half(self, tmp_path):
        p = lines(tmp_path, "a.jsonl", [{"frame": "f", "bbox": [0, 0, 20, 50], "category": "person", "visible_bbox": [0, 0, 20, 25]}])
        assert read_annotations(p)[0].occlusion_fraction == pytest.approx(0.5, abs=1e-12)

    def test_categories(self, tmp_path):
        p = lines(tmp_path, "a.jsonl", [
            {"frame": "f", "bbox": [0, 0, 1, 1], "category": c} for c in ("person", "people", "person?")
        ])
        assert [a.category for a in read_annotations(p)] == ["person", "people", "person_unclear"]

    def test_unknown_category(self, tmp_path):
        p = lines(tmp_path, "a.jsonl", [{"frame": "f", "bbox": [0, 0, 1, 1], "category": "rider"}])
        with pytest.raises(FormatError, match=":1: unknown category"):
            read_annotations(p)

    def test_inconsistent_occlusion(self, tmp_path):
        p = lines(tmp_path, "a.jsonl", [
            {"frame": "f", "bbox": [0, 0, 20, 50], "category": "person", "visible_bbox": [0, 0, 20, 25], "occlusion": 0.51},
            {"frame": "f", "bbox": [0, 0, 20, 50], "category": "person", "visible_bbox": [0, 0, 20, 25], "occlusion": 0.6},
        ])
        with pytest.raises(FormatError, match=":2: occlusion"):
            read_annotations(p)

    def test_explicit_occlusion(self, tmp_path):
        p = lines(tmp_path, "a.jsonl", [{"frame": "f", "bbox": [0, 0, 1, 1], "category": "person", "occlusion": 0.3}])
        assert read_annotations(p)[0].occlusion_fraction == 0.3

    def test_round_trip(self, tmp_path):
        anns = [
            GroundTruthAnnotation("f0", BoundingBox(1.5, 2, 20, 50), "person", BoundingBox(1.5, 2, 20, 30)),
            GroundTruthAnnotation("f0", BoundingBox(100, 2, 60, 50), "people"),
            GroundTruthAnnotation("f1", BoundingBox(3, 4, 10, 30), "person_unclear", occlusion=0.2),
        ]
        write_annotations(tmp_path / "a.jsonl", anns)
        assert read_annotations(tmp_path / "a.jsonl") == anns


class TestVerdicts:
    def test_default_classifier_is_stem(self, tmp_path):
        p = lines(tmp_path, "resnet.jsonl", [{"id": "c1", "p": 0.4}])
        assert read_verdicts(p) == [ClassifierVerdict("c1", "resnet", 0.4)]

    def test_out_of_range(self, tmp_path):
        with pytest.raises(FormatError, match=":1: probability"):
            read_verdicts(lines(tmp_path, "v.jsonl", [{"id": "c1", "p": -0.1}]))

    def test_round_trip(self, tmp_path):
        vs = [ClassifierVerdict("c1", "a", 0.1), ClassifierVerdict("c1", "b", 0.123456789012345)]
        write_verdicts(tmp_path / "v.jsonl", vs)
        assert read_verdicts(tmp_path / "v.jsonl") == vs


def pgm(tmp_path, name, payload):
    path = tmp_path / name
    path.write_bytes(payload)
    return path


class TestMask:
    def test_two_by_two(self, tmp_path):
        m = read_mask(pgm(tmp_path, "f7.pgm", b"P5\n2 2\n255\n" + bytes([0, 255, 0, 0])))
        assert m.frame_id == "f7"
        np.testing.assert_array_equal(m.pixels, [[False, True], [False, False]])

    def test_all_on(self, tmp_path):
        m = read_mask(pgm(tmp_path, "f.pgm", b"P5 3 2 255 " + bytes([255] * 6)))
        assert m.pixels.all() and (m.width, m.height) == (3, 2)

    def test_header_comment(self, tmp_path):
        m = read_mask(pgm(tmp_path, "f.pgm", b"P5\n# made by hand\n1 1\n255\n\x01"))
        assert m.pixels[0, 0]

    @pytest.mark.parametrize("payload,match", [
        (b"P2\n2 2\n255\n0 0 0 0\n", "magic"),
        (b"P5\n2 2\n255\n\x00\x00\x00", "truncated"),
        (b"P5\n0 2\n255\n", "dimensions"),
        (b"P5\n2 2\n65535\n" + bytes(8), "maxval"),
    ])
    def test_rejects(self, tmp_path, payload, match):
        with pytest.raises(FormatError, match=match):
            read_mask(pgm(tmp_path, "bad.pgm", payload))

    def test_round_trip(self, tmp_path):
        px = np.random.default_rng(1).random((7, 5)) < 0.3
        m = SegmentationMask("f3", 5, 7, px)
        write_mask(tmp_path / "f3.pgm", m)
        assert read_mask(tmp_path / "f3.pgm") == m
        assert read_masks(tmp_path) == {"f3": m}
        assert read_masks(tmp_path, ["f3", "absent"]) == {"f3": m}


def test_frames_round_trip(tmp_path):
    write_frames(tmp_path / "frames.txt", ["b", "a"])
    assert read_frames(tmp_path / "frames.txt") == ["b", "a"]
    (tmp_path / "dup.txt").write_text("a\na\n")
    with pytest.raises(FormatError):
        read_frames(tmp_path / "dup.txt")
