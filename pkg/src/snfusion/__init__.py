"""Soft-rejection fusion of pedestrian-detector candidates, with Caltech-style evaluation."""

from .anchors import AnchorConfig, LayerSpec, default_box_array, generate_default_boxes
from .evaluation import (
    SETTINGS,
    EvalSetting,
    MissRateCurve,
    compute_curve,
    compute_lamr,
    evaluate_frames,
    filter_ground_truth,
    match_frame,
)
from .fusion import (
    Candidate,
    ClassifierVerdict,
    DetectionTable,
    FusionParams,
    collect_for_classification,
    fuse_all,
    fuse_classifiers,
    fuse_scores,
    fuse_segmentation,
    fuse_table,
    gather_verdicts,
    hard_reject,
    nms,
    scaling_factor,
)
from .geometry import (
    BoundingBox,
    GroundTruthAnnotation,
    SegmentationMask,
    iou_matrix,
    jaccard,
    label_candidates,
    mask_coverage,
)
from .pipeline import RunConfig, run_pipeline
from .simulate import (
    SceneConfig,
    SimClassifierSpec,
    SyntheticScene,
    generate_corpus,
    generate_scene,
    simulate_verdicts,
    synthesize_mask,
)

__all__ = [
    "AnchorConfig",
    "LayerSpec",
    "default_box_array",
    "generate_default_boxes",
    "SETTINGS",
    "EvalSetting",
    "MissRateCurve",
    "compute_curve",
    "compute_lamr",
    "evaluate_frames",
    "filter_ground_truth",
    "match_frame",
    "Candidate",
    "ClassifierVerdict",
    "DetectionTable",
    "FusionParams",
    "collect_for_classification",
    "fuse_all",
    "fuse_classifiers",
    "fuse_scores",
    "fuse_segmentation",
    "fuse_table",
    "gather_verdicts",
    "hard_reject",
    "nms",
    "scaling_factor",
    "BoundingBox",
    "GroundTruthAnnotation",
    "SegmentationMask",
    "iou_matrix",
    "jaccard",
    "label_candidates",
    "mask_coverage",
    "RunConfig",
    "run_pipeline",
    "SceneConfig",
    "SimClassifierSpec",
    "SyntheticScene",
    "generate_corpus",
    "generate_scene",
    "simulate_verdicts",
    "synthesize_mask",
]

__version__ = "0.1.0"
