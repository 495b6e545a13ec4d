"""Figure rendering for evaluation reports.

Writes PNG files next to the delimited curve output.  Uses the Agg
backend so it runs headless.
"""

from __future__ import annotations

import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .metrics import PRECISION_THRESHOLDS, SUCCESS_THRESHOLDS, EvalReport

log = logging.getLogger(__name__)

_DPI = 120


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    log.info("wrote %s", path)
    return path


def render_iou_trace(ious: np.ndarray, gt_present: np.ndarray, out_dir: Path) -> Path:
    """Per-frame overlap trace with ground-truth absences shaded."""
    fig, ax = plt.subplots(figsize=(8, 3))
    t = np.arange(len(ious))
    ax.plot(t, ious, lw=0.8, color="tab:blue")
    absent = ~gt_present
    if absent.any():
        ax.fill_between(t, 0, 1, where=absent, color="tab:gray", alpha=0.25, linewidth=0)
    ax.set_xlabel("frame")
    ax.set_ylabel("IoU")
    ax.set_ylim(-0.02, 1.02)
    ax.set_xlim(0, max(1, len(ious) - 1))
    ax.grid(alpha=0.3)
    return _save(fig, out_dir / "iou_per_frame.png")


def render_lt_curves(report: EvalReport, out_dir: Path) -> Path:
    """Precision/recall and F against the confidence threshold."""
    thr = [p.threshold for p in report.lt_curve]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
    ax1.plot(thr, [p.precision for p in report.lt_curve], label="precision", color="tab:blue")
    ax1.plot(thr, [p.recall for p in report.lt_curve], label="recall", color="tab:orange")
    ax1.set_xlabel("confidence threshold")
    ax1.set_ylabel("rate")
    ax1.set_ylim(-0.02, 1.02)
    ax1.grid(alpha=0.3)
    ax1.legend()
    fs = [p.f for p in report.lt_curve]
    ax2.plot(thr, fs, color="tab:green")
    k = int(np.argmax(fs))
    ax2.plot([thr[k]], [fs[k]], "o", color="tab:red", label=f"max F = {fs[k]:.3f}")
    ax2.set_xlabel("confidence threshold")
    ax2.set_ylabel("F")
    ax2.set_ylim(-0.02, 1.02)
    ax2.grid(alpha=0.3)
    ax2.legend()
    return _save(fig, out_dir / "lt_curves.png")


def render_otb_curves(report: EvalReport, out_dir: Path) -> list[Path]:
    """Success-vs-overlap and precision-vs-center-error plots."""
    fig, ax = plt.subplots(figsize=(4.5, 3.5))
    ax.plot(SUCCESS_THRESHOLDS, report.success_curve, color="tab:blue")
    ax.set_xlabel("overlap threshold")
    ax.set_ylabel("success rate")
    ax.set_ylim(-0.02, 1.02)
    ax.set_title(f"AUC = {report.success_auc:.4f}")
    ax.grid(alpha=0.3)
    p1 = _save(fig, out_dir / "success_plot.png")

    fig, ax = plt.subplots(figsize=(4.5, 3.5))
    ax.plot(PRECISION_THRESHOLDS, report.precision_curve, color="tab:orange")
    ax.set_xlabel("center error threshold (px)")
    ax.set_ylabel("precision")
    ax.set_ylim(-0.02, 1.02)
    ax.set_title(f"precision@20 = {report.precision_at_20:.4f}")
    ax.grid(alpha=0.3)
    p2 = _save(fig, out_dir / "precision_plot.png")
    return [p1, p2]


def render_report(
    report: EvalReport,
    out_dir: Path,
    ious: np.ndarray | None = None,
    gt_present: np.ndarray | None = None,
) -> list[Path]:
    """Render every figure the report's mode supports."""
    paths = []
    if ious is not None and gt_present is not None:
        paths.append(render_iou_trace(ious, gt_present, out_dir))
    if report.lt_curve is not None:
        paths.append(render_lt_curves(report, out_dir))
    if report.success_curve is not None:
        paths.extend(render_otb_curves(report, out_dir))
    return paths
