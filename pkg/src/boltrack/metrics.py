"""Box-level track quality: mean overlap, long-term F-score, OTB curves.

All metrics compare a predicted track against a ground-truth track frame
by frame.  An absent prediction contributes IoU 0 (center error
infinity); frames where the ground truth is absent are excluded from
mean-overlap style metrics and penalize precision when the tracker
reports a box anyway.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass

import numpy as np

from .geometry import center_distance, iou
from .model import TrackResult

log = logging.getLogger(__name__)

SUCCESS_THRESHOLDS = [k / 100.0 for k in range(101)]
PRECISION_THRESHOLDS = [float(k) for k in range(51)]
MODES = ("vos", "lt", "otb")


@dataclass(frozen=True)
class LtPoint:
    threshold: float
    precision: float
    recall: float
    f: float


@dataclass(frozen=True)
class EvalReport:
    """Metrics for one sequence (or a summary across sequences).

    Fields not computed by the requested mode stay None.
    """

    mode: str
    n_frames: int
    j_box: float | None = None
    lt_curve: tuple[LtPoint, ...] | None = None
    max_f: float | None = None
    success_curve: tuple[float, ...] | None = None
    success_auc: float | None = None
    precision_curve: tuple[float, ...] | None = None
    precision_at_20: float | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2) + "\n"


def _check_lengths(pred: TrackResult, gt: TrackResult) -> None:
    if len(pred) != len(gt):
        raise ValueError(f"track has {len(pred)} frames, ground truth has {len(gt)}")


def per_frame_iou(pred: TrackResult, gt: TrackResult) -> np.ndarray:
    """IoU per frame; 0 wherever either side is absent."""
    _check_lengths(pred, gt)
    out = np.zeros(len(pred), dtype=np.float64)
    for t, (p, g) in enumerate(zip(pred, gt)):
        if p.box is not None and g.box is not None:
            out[t] = iou(p.box, g.box)
    return out


def j_box(pred: TrackResult, gt: TrackResult) -> float:
    """Mean IoU over the frames where the ground truth is present.

    An absent prediction on a present frame counts as IoU 0; frames with
    absent ground truth are excluded entirely.

    Raises:
        ValueError: length mismatch, or no ground-truth-present frames.
    """
    ious = per_frame_iou(pred, gt)
    mask = np.array([g.box is not None for g in gt], dtype=bool)
    if not mask.any():
        raise ValueError("ground truth has no present frames")
    return float(np.mean(ious[mask]))


def f_score(pr: float, re: float) -> float:
    """Harmonic F-score; 0 when both rates are 0."""
    if pr + re == 0.0:
        return 0.0
    return 2 * pr * re / (pr + re)


def lt_pr_re_f(pred: TrackResult, gt: TrackResult) -> tuple[tuple[LtPoint, ...], float]:
    """Precision/recall/F over the track's own confidence thresholds.

    For each distinct confidence theta: precision is the mean IoU over
    frames where the tracker reports a box with confidence >= theta
    (reports on ground-truth-absent frames count as IoU 0); recall is
    the summed IoU over confident frames divided by the number of
    ground-truth-present frames.

    Returns:
        (curve ascending in threshold, max F over the curve).
    """
    _check_lengths(pred, gt)
    ious = per_frame_iou(pred, gt)
    conf = np.array([p.confidence for p in pred], dtype=np.float64)
    p_present = np.array([p.box is not None for p in pred], dtype=bool)
    g_present = np.array([g.box is not None for g in gt], dtype=bool)
    n_gt = int(g_present.sum())

    points = []
    for theta in sorted(set(conf.tolist())):
        sel = p_present & (conf >= theta)
        pr = float(ious[sel].sum() / sel.sum()) if sel.any() else 0.0
        re = float(ious[sel & g_present].sum() / n_gt) if n_gt else 0.0
        points.append(LtPoint(threshold=float(theta), precision=pr, recall=re, f=f_score(pr, re)))
    max_f = max(p.f for p in points)
    return tuple(points), max_f


def otb_curves(
    pred: TrackResult, gt: TrackResult
) -> tuple[tuple[float, ...], float, tuple[float, ...], float]:
    """Success and precision curves on the standard grids.

    Success at threshold theta is the fraction of frames with IoU
    strictly above theta, sampled at 0, 0.01, ..., 1.0; its mean is the
    AUC.  Precision at radius rho is the fraction of frames with center
    error at most rho pixels, sampled at 0..50.  Absent predictions
    count IoU 0 and center error infinity.

    Raises:
        ValueError: the ground truth is absent on any frame (this is a
            full-presence protocol).
    """
    _check_lengths(pred, gt)
    if any(g.box is None for g in gt):
        raise ValueError("ground truth must be present on every frame for overlap curves")
    ious = per_frame_iou(pred, gt)
    errs = np.array(
        [
            center_distance(p.box, g.box) if p.box is not None else math.inf
            for p, g in zip(pred, gt)
        ],
        dtype=np.float64,
    )
    success = tuple(float(np.mean(ious > th)) for th in SUCCESS_THRESHOLDS)
    precision = tuple(float(np.mean(errs <= th)) for th in PRECISION_THRESHOLDS)
    auc = float(np.mean(success))
    return success, auc, precision, precision[20]


def evaluate(pred: TrackResult, gt: TrackResult, mode: str) -> EvalReport:
    """Compute the metrics for one mode: vos, lt, or otb."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if mode == "vos":
        return EvalReport(mode=mode, n_frames=len(pred), j_box=j_box(pred, gt))
    if mode == "lt":
        curve, max_f = lt_pr_re_f(pred, gt)
        return EvalReport(
            mode=mode, n_frames=len(pred), j_box=j_box(pred, gt), lt_curve=curve, max_f=max_f
        )
    success, auc, precision, p20 = otb_curves(pred, gt)
    return EvalReport(
        mode=mode,
        n_frames=len(pred),
        success_curve=success,
        success_auc=auc,
        precision_curve=precision,
        precision_at_20=p20,
    )


def _lt_value_at(curve: tuple[LtPoint, ...], theta: float) -> tuple[float, float, float]:
    # Pr/Re/F are right-constant steps in theta: the value at theta is the
    # recorded value at the smallest curve threshold >= theta, and zero
    # past the last one (no report clears such a threshold).
    for p in curve:
        if p.threshold >= theta:
            return (p.precision, p.recall, p.f)
    return (0.0, 0.0, 0.0)


def summarize(reports: list[EvalReport]) -> EvalReport:
    """Average reports across sequences.

    Scalars take their unweighted mean.  Success and precision curves
    average pointwise on their fixed grids; long-term curves are step
    functions of the threshold, so they are re-evaluated on the union of
    every report's thresholds and averaged there.

    Raises:
        ValueError: empty input or mixed modes.
    """
    if not reports:
        raise ValueError("no reports to summarize")
    mode = reports[0].mode
    if any(r.mode != mode for r in reports):
        raise ValueError("cannot summarize reports of different modes")

    def mean_of(name: str):
        vals = [getattr(r, name) for r in reports]
        return float(np.mean(vals)) if vals[0] is not None else None

    lt_curve = None
    if mode == "lt":
        thresholds = sorted({p.threshold for r in reports for p in r.lt_curve})
        points = []
        for theta in thresholds:
            vals = np.array([_lt_value_at(r.lt_curve, theta) for r in reports])
            pr, re, f = vals.mean(axis=0)
            points.append(LtPoint(threshold=theta, precision=float(pr), recall=float(re), f=float(f)))
        lt_curve = tuple(points)

    def mean_curve(name: str):
        if getattr(reports[0], name) is None:
            return None
        stack = np.array([getattr(r, name) for r in reports], dtype=np.float64)
        return tuple(float(v) for v in stack.mean(axis=0))

    return EvalReport(
        mode=mode,
        n_frames=sum(r.n_frames for r in reports),
        j_box=mean_of("j_box"),
        lt_curve=lt_curve,
        max_f=mean_of("max_f"),
        success_curve=mean_curve("success_curve"),
        success_auc=mean_of("success_auc"),
        precision_curve=mean_curve("precision_curve"),
        precision_at_20=mean_of("precision_at_20"),
    )
