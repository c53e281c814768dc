"""On-disk formats.

* detections, annotations, verdicts: JSON Lines, one record per line
* segmentation masks: binary PGM (``P5``), one file per frame named ``<frame>.pgm``
* frame lists: plain text, one frame id per line

Detection records carry the generator score as ``score``.  Fused records
add ``score_fused`` (rounded to 9 significant digits, for reading by eye)
and the exact ``factors`` list; on reading, the fused score is recomputed
from the factors, so a write/read round trip is exact.
"""

from __future__ import annotations

import json
import os
import re
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .fusion import Candidate, ClassifierVerdict, replay_factors
from .geometry import BoundingBox, GroundTruthAnnotation, SegmentationMask

FILE_CATEGORIES = {"person": "person", "people": "people", "person?": "person_unclear"}
CATEGORY_NAMES = {v: k for k, v in FILE_CATEGORIES.items()}
OCCLUSION_TOLERANCE = 0.02
FUSED_DIGITS = 9


class FormatError(ValueError):
    """Malformed input; ``str()`` reads ``path:line: message``."""

    def __init__(self, path, line: Optional[int], message: str):
        self.path = str(path)
        self.line = line
        self.message = message
        where = f"{self.path}:{line}" if line is not None else self.path
        super().__init__(f"{where}: {message}")


def dumps_line(obj) -> str:
    return json.dumps(obj, separators=(",", ":"), allow_nan=False)


def _iter_records(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                rec = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise FormatError(path, lineno, f"invalid JSON ({exc.msg})") from None
            if not isinstance(rec, dict):
                raise FormatError(path, lineno, "expected a JSON object")
            yield lineno, rec


def _require(rec, key, path, lineno):
    if key not in rec:
        raise FormatError(path, lineno, f"missing field {key!r}")
    return rec[key]


def _parse_box(value, path, lineno, field="bbox") -> BoundingBox:
    if not isinstance(value, list) or len(value) != 4:
        raise FormatError(path, lineno, f"{field} must be a list [x, y, w, h]")
    if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
        raise FormatError(path, lineno, f"{field} entries must be numbers")
    try:
        return BoundingBox(*(float(v) for v in value))
    except ValueError as exc:
        raise FormatError(path, lineno, f"{field}: {exc}") from None


def _number(value, what, path, lineno) -> float:
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise FormatError(path, lineno, f"{what} must be a number")
    return float(value)


def read_detections(path) -> list:
    out = []
    seen = set()
    for lineno, rec in _iter_records(path):
        cid = str(_require(rec, "id", path, lineno))
        if cid in seen:
            raise FormatError(path, lineno, f"duplicate candidate id {cid!r}")
        seen.add(cid)
        frame = str(_require(rec, "frame", path, lineno))
        box = _parse_box(_require(rec, "bbox", path, lineno), path, lineno)
        score = _number(_require(rec, "score", path, lineno), "score", path, lineno)
        if not 0.0 <= score <= 1.0:
            raise FormatError(path, lineno, f"score {score} outside [0, 1]")
        factors = ()
        if "factors" in rec:
            try:
                factors = tuple((str(tag), float(f)) for tag, f in rec["factors"])
            except (TypeError, ValueError):
                raise FormatError(path, lineno, "factors must be a list of [source, factor] pairs") from None
            if any(not f > 0 for _, f in factors):
                raise FormatError(path, lineno, "factors must be positive")
            fused = replay_factors(score, factors)
            if "score_fused" in rec:
                stored = _number(rec["score_fused"], "score_fused", path, lineno)
                if abs(stored - fused) > 1e-8 * max(1.0, abs(fused)):
                    raise FormatError(path, lineno, f"score_fused {stored} disagrees with factors ({fused})")
        elif "score_fused" in rec:
            raise FormatError(path, lineno, "score_fused given without factors")
        out.append(Candidate(cid, frame, box, score, applied_factors=factors))
    return out


def detection_record(c: Candidate) -> dict:
    rec = {"id": c.id, "frame": c.frame_id, "bbox": c.box.as_list(), "score": c.score_generator}
    if c.applied_factors:
        rec["score_fused"] = float(f"{c.score_fused:.{FUSED_DIGITS}g}")
        rec["factors"] = [[tag, f] for tag, f in c.applied_factors]
    return rec


def write_detections(path, candidates: Iterable[Candidate]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for c in candidates:
            fh.write(dumps_line(detection_record(c)) + "\n")


def read_annotations(path) -> list:
    out = []
    for lineno, rec in _iter_records(path):
        frame = str(_require(rec, "frame", path, lineno))
        box = _parse_box(_require(rec, "bbox", path, lineno), path, lineno)
        raw_cat = _require(rec, "category", path, lineno)
        if raw_cat not in FILE_CATEGORIES:
            raise FormatError(path, lineno, f"unknown category {raw_cat!r}; expected one of {list(FILE_CATEGORIES)}")
        visible = None
        if rec.get("visible_bbox") is not None:
            visible = _parse_box(rec["visible_bbox"], path, lineno, "visible_bbox")
        occlusion = None
        if rec.get("occlusion") is not None:
            occlusion = _number(rec["occlusion"], "occlusion", path, lineno)
        try:
            ann = GroundTruthAnnotation(frame, box, FILE_CATEGORIES[raw_cat], visible, occlusion)
        except ValueError as exc:
            raise FormatError(path, lineno, str(exc)) from None
        if visible is not None and occlusion is not None:
            derived = ann.occlusion_fraction
            if abs(derived - occlusion) > OCCLUSION_TOLERANCE:
                raise FormatError(
                    path, lineno, f"occlusion {occlusion} inconsistent with visible_bbox (derived {derived:.4f})"
                )
        out.append(ann)
    return out


def write_annotations(path, annotations: Iterable[GroundTruthAnnotation]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for a in annotations:
            rec = {"frame": a.frame_id, "bbox": a.box.as_list(), "category": CATEGORY_NAMES[a.category]}
            if a.visible_box is not None:
                rec["visible_bbox"] = a.visible_box.as_list()
            if a.occlusion is not None:
                rec["occlusion"] = a.occlusion
            fh.write(dumps_line(rec) + "\n")


def read_verdicts(path, classifier_id: Optional[str] = None) -> list:
    """Verdict lines ``{"id", "p", "classifier"?}``.

    Lines without ``classifier`` are attributed to ``classifier_id``, or to
    the file stem when that is not given.
    """
    default = classifier_id or Path(path).stem
    out = []
    seen = set()
    for lineno, rec in _iter_records(path):
        cid = str(_require(rec, "id", path, lineno))
        clf = str(rec.get("classifier", default))
        p = _number(_require(rec, "p", path, lineno), "p", path, lineno)
        if not 0.0 <= p <= 1.0:
            raise FormatError(path, lineno, f"probability {p} outside [0, 1]")
        if (cid, clf) in seen:
            raise FormatError(path, lineno, f"duplicate verdict for {cid!r} from {clf!r}")
        seen.add((cid, clf))
        out.append(ClassifierVerdict(cid, clf, p))
    return out


def write_verdicts(path, verdicts: Iterable[ClassifierVerdict]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for v in verdicts:
            fh.write(dumps_line({"id": v.candidate_id, "classifier": v.classifier_id, "p": v.probability}) + "\n")


_PNM_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def read_mask(path, frame_id: Optional[str] = None) -> SegmentationMask:
    """Binary PGM (``P5``, maxval <= 255); any nonzero pixel is pedestrian."""
    data = Path(path).read_bytes()
    if data[:2] != b"P5":
        raise FormatError(path, None, f"expected magic P5, got {data[:2]!r}")
    pos = 2
    header = []
    for _ in range(3):
        m = _PNM_TOKEN.match(data, pos)
        if m is None:
            raise FormatError(path, None, "truncated header")
        header.append(m.group(1))
        pos = m.end()
    try:
        width, height, maxval = (int(t) for t in header)
    except ValueError:
        raise FormatError(path, None, f"non-integer header fields {header!r}") from None
    if width <= 0 or height <= 0:
        raise FormatError(path, None, f"zero or negative dimensions {width}x{height}")
    if not 0 < maxval <= 255:
        raise FormatError(path, None, f"maxval {maxval} unsupported (need 1..255)")
    if pos >= len(data) or not data[pos:pos + 1].isspace():
        raise FormatError(path, None, "missing whitespace after header")
    pos += 1
    raster = data[pos:pos + width * height]
    if len(raster) < width * height:
        raise FormatError(path, None, f"truncated raster: {len(raster)} of {width * height} bytes")
    pixels = np.frombuffer(raster, dtype=np.uint8).reshape(height, width) > 0
    frame = frame_id if frame_id is not None else Path(path).stem
    return SegmentationMask(frame, width, height, pixels)


def write_mask(path, mask: SegmentationMask) -> None:
    header = f"P5\n{mask.width} {mask.height}\n255\n".encode("ascii")
    body = np.where(mask.pixels, 255, 0).astype(np.uint8).tobytes()
    Path(path).write_bytes(header + body)


def mask_path(directory, frame_id: str) -> Path:
    return Path(directory) / f"{frame_id}.pgm"


def read_masks(directory, frames: Optional[Sequence[str]] = None) -> dict:
    """Masks keyed by frame id; with ``frames``, only those present on disk are loaded."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FormatError(directory, None, "mask directory does not exist")
    if frames is None:
        paths = sorted(directory.glob("*.pgm"))
    else:
        paths = [p for p in (mask_path(directory, f) for f in sorted(set(frames))) if p.exists()]
    return {p.stem: read_mask(p) for p in paths}


def read_frames(path) -> list:
    with open(path, encoding="utf-8") as fh:
        frames = [line.strip() for line in fh if line.strip()]
    if len(set(frames)) != len(frames):
        raise FormatError(path, None, "duplicate frame ids")
    return frames


def write_frames(path, frames: Iterable[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for f in frames:
            fh.write(f"{f}\n")


def write_text(path, text: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)
