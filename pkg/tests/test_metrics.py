from __future__ import annotations

import json
import random

import numpy as np
import pytest

from boltrack.geometry import BoundingBox
from boltrack.metrics import (
    EvalReport,
    evaluate,
    f_score,
    j_box,
    lt_pr_re_f,
    otb_curves,
    per_frame_iou,
    summarize,
)
from boltrack.model import TrackEntry, TrackResult

GT_BOX = BoundingBox(0.0, 0.0, 10.0, 10.0)
OFF_BOX = BoundingBox(500.0, 0.0, 10.0, 10.0)


def _track(entries: list[tuple[BoundingBox | None, float]]) -> TrackResult:
    return TrackResult(
        [
            TrackEntry(frame=t, box=box, confidence=conf)
            for t, (box, conf) in enumerate(entries)
        ]
    )


def _gt(boxes: list[BoundingBox | None]) -> TrackResult:
    return _track([(b, 1.0 if b is not None else 0.0) for b in boxes])


def test_f_score_values():
    assert f_score(0.5, 0.5) == 0.5
    assert f_score(0.6, 0.3) == 0.4
    assert f_score(0.0, 0.0) == 0.0
    assert f_score(1.0, 1.0) == 1.0


def test_j_box_identity_and_absence():
    gt = _gt([GT_BOX, GT_BOX, GT_BOX])
    assert j_box(gt, gt) == 1.0
    absent = _track([(None, 0.0)] * 3)
    assert j_box(absent, gt) == 0.0


def test_j_box_mixes_only_present_frames():
    # frame ious 1.0 and 50/150, with one gt-absent frame ignored
    half = BoundingBox(5.0, 0.0, 10.0, 10.0)
    pred = _track([(GT_BOX, 0.9), (half, 0.9), (OFF_BOX, 0.9)])
    gt = _gt([GT_BOX, GT_BOX, None])
    assert j_box(pred, gt) == (1.0 + 50.0 / 150.0) / 2.0


def test_j_box_errors():
    gt = _gt([GT_BOX])
    long_pred = _track([(GT_BOX, 1.0), (GT_BOX, 1.0)])
    with pytest.raises(ValueError):
        j_box(long_pred, gt)
    with pytest.raises(ValueError, match="no present frames"):
        j_box(_track([(None, 0.0)]), _gt([None]))


def test_per_frame_iou_zeroes_absences():
    pred = _track([(GT_BOX, 1.0), (None, 0.0)])
    gt = _gt([None, GT_BOX])
    assert per_frame_iou(pred, gt).tolist() == [0.0, 0.0]


def test_lt_perfect_tracker():
    gt = _gt([GT_BOX] * 5)
    pred = _track([(GT_BOX, 1.0)] * 5)
    curve, max_f = lt_pr_re_f(pred, gt)
    assert max_f == 1.0
    for point in curve:
        assert point.precision == 1.0
        assert point.recall == 1.0
        assert point.f == 1.0


def test_lt_curve_hand_computed():
    pred = _track([(GT_BOX, 0.9), (OFF_BOX, 0.8), (None, 0.0), (GT_BOX, 0.4)])
    gt = _gt([GT_BOX] * 4)
    curve, max_f = lt_pr_re_f(pred, gt)
    assert [p.threshold for p in curve] == [0.0, 0.4, 0.8, 0.9]
    # theta 0 and 0.4 select the three present predictions
    for p in curve[:2]:
        assert p.precision == pytest.approx(2.0 / 3.0)
        assert p.recall == 0.5
        assert p.f == pytest.approx(4.0 / 7.0)
    assert curve[2].precision == 0.5
    assert curve[2].recall == 0.25
    assert curve[2].f == pytest.approx(1.0 / 3.0)
    assert curve[3].precision == 1.0
    assert curve[3].recall == 0.25
    assert curve[3].f == pytest.approx(0.4)
    assert max_f == pytest.approx(4.0 / 7.0)


def test_lt_false_positive_penalizes_precision_only():
    pred = _track([(GT_BOX, 1.0), (GT_BOX, 1.0), (None, 0.0)])
    gt = _gt([GT_BOX, None, None])
    curve, max_f = lt_pr_re_f(pred, gt)
    # the confident report on an absent-gt frame halves precision; the
    # absent report on the other absent-gt frame costs nothing
    for p in curve:
        if p.threshold > 0.0:
            assert p.precision == 0.5
            assert p.recall == 1.0
    assert max_f == pytest.approx(2.0 / 3.0)


def test_lt_max_f_invariant_under_monotone_confidence_maps():
    rng = random.Random(3)
    entries = []
    boxes = [GT_BOX, OFF_BOX, None]
    for t in range(40):
        b = boxes[rng.randrange(3)]
        entries.append((b, rng.choice([0.0, 0.2, 0.5, 0.7, 0.9]) if b else 0.0))
    gt = _gt([GT_BOX if rng.random() < 0.8 else None for _ in range(40)])
    pred = _track(entries)
    _, max_f = lt_pr_re_f(pred, gt)
    squeezed = _track([(b, c / 2.0 + 0.1 if b else 0.0) for b, c in entries])
    _, max_f2 = lt_pr_re_f(squeezed, gt)
    assert max_f2 == pytest.approx(max_f, abs=1e-12)


def test_otb_all_correct():
    gt = _gt([GT_BOX] * 7)
    success, auc, precision, p20 = otb_curves(gt, gt)
    assert success[:100] == (1.0,) * 100
    assert success[100] == 0.0
    assert auc == 100.0 / 101.0
    assert precision == (1.0,) * 51
    assert p20 == 1.0
    # strict-inequality sampling keeps the auc below the mean overlap
    assert auc < j_box(gt, gt)


def test_otb_half_correct():
    pred = _track([(GT_BOX, 1.0)] * 5 + [(OFF_BOX, 1.0)] * 5)
    gt = _gt([GT_BOX] * 10)
    success, auc, precision, p20 = otb_curves(pred, gt)
    assert success[:100] == (0.5,) * 100
    assert auc == 50.0 / 101.0
    assert precision == (0.5,) * 51
    assert p20 == 0.5


def test_otb_all_absent():
    pred = _track([(None, 0.0)] * 4)
    gt = _gt([GT_BOX] * 4)
    success, auc, precision, p20 = otb_curves(pred, gt)
    assert auc == 0.0
    assert precision == (0.0,) * 51
    # degenerate all-zero case is where auc equals the mean overlap
    assert auc == float(np.mean(per_frame_iou(pred, gt)))


def test_otb_requires_full_gt_presence():
    pred = _track([(GT_BOX, 1.0)] * 2)
    with pytest.raises(ValueError):
        otb_curves(pred, _gt([GT_BOX, None]))


def test_otb_success_recount_and_monotonicity():
    rng = random.Random(9)
    entries = []
    for _ in range(60):
        if rng.random() < 0.15:
            entries.append((None, 0.0))
        else:
            entries.append((BoundingBox(rng.uniform(0, 8), rng.uniform(0, 8), 10, 10), 1.0))
    pred = _track(entries)
    gt = _gt([GT_BOX] * 60)
    success, auc, _, _ = otb_curves(pred, gt)
    ious = per_frame_iou(pred, gt)
    for k, s in enumerate(success):
        expected = sum(1 for v in ious if v > k / 100.0) / 60.0
        assert s == expected
    assert all(a >= b for a, b in zip(success, success[1:]))
    assert 0.0 <= auc <= 1.0


def test_evaluate_modes():
    gt = _gt([GT_BOX] * 3)
    pred = _track([(GT_BOX, 0.8)] * 3)
    vos = evaluate(pred, gt, "vos")
    assert vos.j_box == 1.0
    assert vos.lt_curve is None
    lt = evaluate(pred, gt, "lt")
    assert lt.max_f == 1.0
    assert lt.j_box == 1.0
    otb = evaluate(pred, gt, "otb")
    assert otb.success_auc == 100.0 / 101.0
    assert otb.j_box is None
    with pytest.raises(ValueError):
        evaluate(pred, gt, "box")


def test_report_json_round_trip():
    gt = _gt([GT_BOX] * 3)
    report = evaluate(gt, gt, "lt")
    data = json.loads(report.to_json())
    assert data["mode"] == "lt"
    assert data["max_f"] == 1.0
    assert len(data["lt_curve"]) == len(report.lt_curve)


def test_summarize_single_report_is_identity():
    gt = _gt([GT_BOX] * 3)
    report = evaluate(gt, gt, "vos")
    summary = summarize([report])
    assert summary.j_box == report.j_box
    assert summary.n_frames == report.n_frames


def test_summarize_means_scalars():
    r1 = EvalReport(mode="vos", n_frames=10, j_box=0.4)
    r2 = EvalReport(mode="vos", n_frames=20, j_box=0.6)
    summary = summarize([r1, r2])
    assert summary.j_box == 0.5
    assert summary.n_frames == 30


def test_summarize_averages_otb_curves_pointwise():
    gt = _gt([GT_BOX] * 4)
    perfect = evaluate(gt, gt, "otb")
    nothing = evaluate(_track([(None, 0.0)] * 4), gt, "otb")
    summary = summarize([perfect, nothing])
    assert summary.success_curve[0] == 0.5
    assert summary.success_curve[100] == 0.0
    assert summary.success_auc == pytest.approx(50.0 / 101.0)
    assert summary.precision_curve == (0.5,) * 51


def test_summarize_lt_union_grid():
    gt = _gt([GT_BOX, GT_BOX])
    r1 = evaluate(_track([(GT_BOX, 0.5)] * 2), gt, "lt")
    r2 = evaluate(_track([(GT_BOX, 0.8)] * 2), gt, "lt")
    summary = summarize([r1, r2])
    assert [p.threshold for p in summary.lt_curve] == [0.5, 0.8]
    lo, hi = summary.lt_curve
    # both step curves are still 1.0 at 0.5; only one survives past 0.8
    assert (lo.precision, lo.recall, lo.f) == (1.0, 1.0, 1.0)
    assert (hi.precision, hi.recall, hi.f) == (0.5, 0.5, 0.5)
    assert summary.max_f == 1.0


def test_summarize_rejects_bad_input():
    gt = _gt([GT_BOX])
    with pytest.raises(ValueError):
        summarize([])
    with pytest.raises(ValueError, match="different modes"):
        summarize([evaluate(gt, gt, "vos"), evaluate(gt, gt, "otb")])
