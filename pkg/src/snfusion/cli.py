"""Command-line entry point: ``snfusion <command> ...``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import io
from .anchors import AnchorConfig, LayerSpec, default_box_array
from .evaluation import SETTINGS, compute_curve
from .fusion import Candidate, FusionParams, collect_for_classification
from .geometry import BoundingBox, label_candidates
from .pipeline import PREFILTER_MODES, RunConfig, run_pipeline
from .simulate import SceneConfig, SimClassifierSpec, generate_corpus, simulate_verdicts, synthesize_mask


def _fusion_params(args) -> FusionParams:
    return FusionParams(
        a_c=args.a_c,
        b_c=args.b_c,
        a_ss=args.a_ss,
        b_ss=args.b_ss,
        ss_accept_ratio=args.ss_accept,
        collect_min_score=args.min_score,
        collect_min_height_px=args.min_height,
    )


def _add_fusion_flags(p) -> None:
    d = FusionParams()
    p.add_argument("--a-c", type=float, default=d.a_c, help="classifier confidence threshold")
    p.add_argument("--b-c", type=float, default=d.b_c, help="classifier factor floor")
    p.add_argument("--a-ss", type=float, default=d.a_ss, help="segmentation slope")
    p.add_argument("--b-ss", type=float, default=d.b_ss, help="segmentation factor floor")
    p.add_argument("--ss-accept", type=float, default=d.ss_accept_ratio, help="mask coverage accepted as-is")
    p.add_argument("--min-score", type=float, default=d.collect_min_score)
    p.add_argument("--min-height", type=float, default=d.collect_min_height_px)


def _add_eval_flags(p, setting_default="Reasonable") -> None:
    p.add_argument("--setting", default=setting_default, choices=list(SETTINGS))
    p.add_argument("--frames", help="text file listing every frame id (FPPI denominator)")
    p.add_argument("--workers", type=int, default=1)


def cmd_fuse(args) -> int:
    config = RunConfig(
        detections=args.detections,
        annotations=args.annotations,
        fusion=_fusion_params(args),
        setting=args.setting,
        classifier_files=tuple(args.verdicts),
        mask_dir=args.masks,
        frames_file=args.frames,
        nms_iou=args.nms,
        strict=not args.lenient,
        hard=args.hard,
        hard_threshold=args.hard_threshold,
        prefilter=args.prefilter,
        workers=args.workers,
    )
    result = run_pipeline(config)
    io.write_detections(args.out, result.candidates)
    if result.curve is not None:
        if args.curve_out:
            io.write_text(args.curve_out, result.curve.to_csv())
        print(f"{args.setting} lamr={result.curve.lamr:.6f}")
    return 0


def _load_eval_inputs(args):
    dets = io.read_detections(args.detections)
    gt = io.read_annotations(args.annotations)
    frames = io.read_frames(args.frames) if args.frames else None
    return dets, gt, frames


def cmd_eval(args) -> int:
    dets, gt, frames = _load_eval_inputs(args)
    names = list(SETTINGS) if args.setting == "every" else [args.setting]
    lines = ["setting,lamr"]
    for name in names:
        try:
            curve = compute_curve(dets, gt, name, frames=frames, workers=args.workers)
            lines.append(f"{name},{curve.lamr:.6f}")
        except ValueError as exc:
            if len(names) == 1:
                raise
            lines.append(f"{name},nan")
            print(f"warning: {name}: {exc}", file=sys.stderr)
    text = "\n".join(lines) + "\n"
    if args.out:
        io.write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_curve(args) -> int:
    dets, gt, frames = _load_eval_inputs(args)
    curve = compute_curve(dets, gt, args.setting, frames=frames, workers=args.workers)
    if args.out:
        io.write_text(args.out, curve.to_csv())
    else:
        sys.stdout.write(curve.to_csv())
    return 0


def cmd_label(args) -> int:
    dets = io.read_detections(args.detections)
    gt = io.read_annotations(args.annotations)
    params = _fusion_params(args)
    collected = collect_for_classification(dets, params)
    gt_by_frame = {}
    for a in gt:
        gt_by_frame.setdefault(a.frame_id, []).append(a)
    lines = []
    by_frame = {}
    for c in collected:
        by_frame.setdefault(c.frame_id, []).append(c)
    labels = {}
    for frame, group in by_frame.items():
        for c, lab in zip(group, label_candidates([c.box for c in group], gt_by_frame.get(frame, []))):
            labels[c.id] = lab
    for c in collected:
        rec = io.detection_record(c)
        rec["label"] = labels[c.id]
        lines.append(io.dumps_line(rec))
    io.write_text(args.out, "".join(line + "\n" for line in lines))
    return 0


def _parse_grid(text: str) -> tuple:
    try:
        w, h = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must look like 38x38, got {text!r}") from None
    return w, h


def cmd_anchors(args) -> int:
    config = AnchorConfig(image_w=args.image_w, image_h=args.image_h)
    layer = LayerSpec(args.grid[0], args.grid[1], args.layer)
    boxes = default_box_array(layer, config)
    n_ratios = len(config.aspect_ratios)
    cands = []
    for n, row in enumerate(boxes.tolist()):
        cell, k = divmod(n, n_ratios)
        j, i = divmod(cell, layer.grid_w)
        cid = f"L{args.layer}-r{j}-c{i}-{config.ratio_names[k]}"
        cands.append(Candidate(cid, args.frame, BoundingBox(*row), 0.0))
    io.write_detections(args.out, cands)
    return 0


def _parse_classifier(text: str) -> SimClassifierSpec:
    parts = text.split(":")
    if len(parts) not in (3, 4):
        raise argparse.ArgumentTypeError(f"classifier must be NAME:TPR:FPR[:SEED], got {text!r}")
    try:
        seed = int(parts[3]) if len(parts) == 4 else 0
        return SimClassifierSpec(parts[0], "noisy", float(parts[1]), float(parts[2]), seed)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def cmd_simulate(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    config = SceneConfig(image_w=args.image_w, image_h=args.image_h, fp_ratio=args.fp_ratio)
    scenes = generate_corpus(args.frames, config, args.seed, mean_pedestrians=args.mean_pedestrians)
    io.write_frames(out / "frames.txt", [s.frame_id for s in scenes])
    io.write_annotations(out / "annotations.jsonl", [a for s in scenes for a in s.gt])
    io.write_detections(out / "detections.jsonl", [c for s in scenes for c in s.candidates])
    specs = list(args.classifier)
    if args.oracle:
        specs.append(SimClassifierSpec.oracle())
    for k, spec in enumerate(specs):
        if spec.kind == "noisy" and spec.rng_seed == 0:
            # distinct default streams per classifier
            spec = SimClassifierSpec(spec.name, spec.kind, spec.tpr, spec.fpr, args.seed * 1000 + k + 1)
        io.write_verdicts(out / f"verdicts_{spec.name}.jsonl", [v for s in scenes for v in simulate_verdicts(s, spec)])
    if args.mask_quality is not None:
        mask_dir = out / "masks"
        mask_dir.mkdir(exist_ok=True)
        for s in scenes:
            io.write_mask(io.mask_path(mask_dir, s.frame_id), synthesize_mask(s, args.mask_quality))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="snfusion", description="Soft-rejection detection fusion and Caltech-style evaluation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fuse", help="fuse candidate scores with classifier verdicts and masks")
    p.add_argument("--detections", required=True)
    p.add_argument("--verdicts", nargs="*", default=[], help="verdict JSONL files, one per classifier")
    p.add_argument("--masks", help="directory of <frame>.pgm masks")
    p.add_argument("--out", required=True)
    p.add_argument("--annotations", help="also evaluate the fused detections")
    p.add_argument("--curve-out")
    p.add_argument("--nms", type=float, help="IoU threshold for per-frame NMS")
    p.add_argument("--hard", action="store_true", help="hard rejection instead of soft fusion")
    p.add_argument("--hard-threshold", type=float, default=0.5)
    p.add_argument("--lenient", action="store_true", help="missing verdicts count as factor 1")
    p.add_argument("--prefilter", choices=PREFILTER_MODES, default="none")
    _add_fusion_flags(p)
    _add_eval_flags(p)
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("eval", help="log-average miss rate per setting")
    p.add_argument("--detections", required=True)
    p.add_argument("--annotations", required=True)
    p.add_argument("--out")
    p.add_argument("--setting", default="Reasonable", choices=list(SETTINGS) + ["every"])
    p.add_argument("--frames")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("curve", help="FPPI/miss-rate curve as CSV")
    p.add_argument("--detections", required=True)
    p.add_argument("--annotations", required=True)
    p.add_argument("--out")
    _add_eval_flags(p)
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("label", help="label collected candidates against ground truth")
    p.add_argument("--detections", required=True)
    p.add_argument("--annotations", required=True)
    p.add_argument("--out", required=True)
    _add_fusion_flags(p)
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("anchors", help="default-box grid of one output layer")
    p.add_argument("--grid", type=_parse_grid, required=True, help="WxH cells, e.g. 38x38")
    p.add_argument("--layer", type=int, required=True)
    p.add_argument("--image-w", type=float, default=640)
    p.add_argument("--image-h", type=float, default=480)
    p.add_argument("--frame", default="anchors")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_anchors)

    p = sub.add_parser("simulate", help="write a synthetic corpus")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--frames", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mean-pedestrians", type=float, default=2.0)
    p.add_argument("--fp-ratio", type=float, default=2.4)
    p.add_argument("--image-w", type=int, default=640)
    p.add_argument("--image-h", type=int, default=480)
    p.add_argument("--classifier", type=_parse_classifier, action="append", default=[],
                   help="noisy classifier NAME:TPR:FPR[:SEED]; repeatable")
    p.add_argument("--oracle", action="store_true", help="also write oracle verdicts")
    p.add_argument("--mask-quality", type=float, help="write masks/ with this coverage quality")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except io.FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
