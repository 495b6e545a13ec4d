"""Online box-level track rescoring over external detections."""

from .geometry import BoundingBox, center_distance, ff_score, iou
from .metrics import EvalReport, evaluate, j_box, lt_pr_re_f, otb_curves, summarize
from .model import (
    Detection,
    FrameDetections,
    Hyperparams,
    Sequence,
    TrackEntry,
    TrackHypothesis,
    Tracklet,
    TrackResult,
    validate_sequence,
)
from .rescore import RescoringEngine, run_no_rescoring, run_sequence
from .synth import ScenarioSpec, generate, lt_preset

__version__ = "0.1.0"

__all__ = [
    "BoundingBox",
    "Detection",
    "EvalReport",
    "FrameDetections",
    "Hyperparams",
    "RescoringEngine",
    "ScenarioSpec",
    "Sequence",
    "TrackEntry",
    "TrackHypothesis",
    "Tracklet",
    "TrackResult",
    "center_distance",
    "evaluate",
    "ff_score",
    "generate",
    "iou",
    "j_box",
    "lt_preset",
    "lt_pr_re_f",
    "otb_curves",
    "run_no_rescoring",
    "run_sequence",
    "summarize",
    "validate_sequence",
    "__version__",
]
