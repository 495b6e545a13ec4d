"""Online rescoring: a DP over chains of temporally disjoint tracklets.

Each tracklet carries the best score over all chains ending in it.  A
chain scores the sum of its detections' terms (detection score plus
weighted aspect-ratio similarity to the first-frame box) plus a boundary
term per consecutive tracklet pair.  Per frame, the output is the
current detection of the globally best chain, or a consistency-scored
fallback detection when that chain has none.

Keeping only the best chain per ending tracklet is lossless: extending a
tracklet adds the same detection term to every chain that ends in it, so
the argmax over predecessors is fixed at birth.
"""

from __future__ import annotations

import logging
import math

import numpy as np

from .geometry import (
    BoundingBox,
    center_distance,
    center_distance_one_to_many,
    ff_score,
    iou,
    iou_one_to_many,
)
from .model import (
    Detection,
    FrameDetections,
    Hyperparams,
    Sequence,
    StructuralError,
    TrackEntry,
    TrackHypothesis,
    Tracklet,
    TrackResult,
)
from .tracklets import TrackletStore

log = logging.getLogger(__name__)


def detection_term(det: Detection, b_ff: BoundingBox, params: Hyperparams) -> float:
    """Per-detection chain contribution: score + w_ff * aspect similarity."""
    return det.score + params.w_ff * ff_score(b_ff, det.box, params.alpha_ff)


def tracklet_score(trk: Tracklet, b_ff: BoundingBox, params: Hyperparams) -> float:
    """Sum of detection terms over the tracklet, in frame order."""
    total = 0.0
    for det in trk.detections:
        total += detection_term(det, b_ff, params)
    return total


def boundary_score(prev: Tracklet, nxt: Tracklet, params: Hyperparams) -> float:
    """Join score between consecutive chain tracklets.

    IoU minus weighted center distance between prev's last and nxt's
    first box, minus a constant, evaluated regardless of the temporal
    gap.  With length weighting the term counts once per frame of the
    preceding tracklet, otherwise once.

    Raises:
        StructuralError: prev does not end before nxt starts.
    """
    if prev.end >= nxt.start:
        raise StructuralError(
            f"boundary needs prev.end < next.start, got {prev.end} >= {nxt.start}"
        )
    core = (
        params.w_iou * iou(prev.last_box, nxt.first_box)
        - params.w_loc * center_distance(prev.last_box, nxt.first_box)
        - params.alpha_bnd
    )
    length = prev.length if params.boundary_length_weighting else 1
    return length * core


class DpState:
    """Per-tracklet best-chain scores plus the frozen closed-tracklet pool.

    Closed tracklets live in flat arrays (end frame, length, score, last
    box) so a birth can scan every predecessor candidate in one shot.
    Their chain scores never change after closing; only live tracklets
    accumulate new detection terms.
    """

    def __init__(self, params: Hyperparams, b_ff: BoundingBox):
        self.params = params
        self.b_ff = b_ff
        self.frame = -1
        self.tracklets: dict[int, Tracklet] = {}
        self.h_score: dict[int, float] = {}
        self.pred: dict[int, int | None] = {}
        self.live_ids: list[int] = []
        # closed pool, capacity-doubled
        self._n = 0
        self._ids = np.empty(64, dtype=np.int64)
        self._ends = np.empty(64, dtype=np.float64)
        self._lengths = np.empty(64, dtype=np.float64)
        self._scores = np.empty(64, dtype=np.float64)
        self._boxes = np.empty((64, 4), dtype=np.float64)
        self._closed_best_id: int | None = None
        self._closed_best_score = -math.inf

    def advance(self, frame: int) -> None:
        if frame != self.frame + 1:
            raise StructuralError(f"expected frame {self.frame + 1}, got {frame}")
        self.frame = frame

    def _grow(self) -> None:
        cap = len(self._ids) * 2
        self._ids = np.resize(self._ids, cap)
        self._ends = np.resize(self._ends, cap)
        self._lengths = np.resize(self._lengths, cap)
        self._scores = np.resize(self._scores, cap)
        self._boxes = np.resize(self._boxes, (cap, 4))

    def on_closed(self, closed: list[Tracklet]) -> None:
        for trk in closed:
            if self._n == len(self._ids):
                self._grow()
            i = self._n
            self._n = i + 1
            h = self.h_score[trk.id]
            b = trk.last_box
            self._ids[i] = trk.id
            self._ends[i] = trk.end
            self._lengths[i] = trk.length
            self._scores[i] = h
            self._boxes[i, 0] = b.x
            self._boxes[i, 1] = b.y
            self._boxes[i, 2] = b.w
            self._boxes[i, 3] = b.h
            if h > self._closed_best_score or (
                h == self._closed_best_score
                and (self._closed_best_id is None or trk.id < self._closed_best_id)
            ):
                self._closed_best_score = h
                self._closed_best_id = trk.id
            self.live_ids.remove(trk.id)

    def on_extended(self, trk: Tracklet, det: Detection) -> None:
        self.h_score[trk.id] += detection_term(det, self.b_ff, self.params)

    def on_birth(self, trk: Tracklet) -> None:
        """Register a new tracklet and pick its best predecessor.

        Candidates are exactly the tracklets already closed (every
        tracklet ending before trk.start has closed by now).  A chain
        continues through the best positive predecessor value; otherwise
        the tracklet starts a fresh chain.
        """
        p = self.params
        base = detection_term(trk.detections[0], self.b_ff, p)
        pred_id: int | None = None
        contrib = 0.0
        n = self._n
        if n > 0:
            first = trk.first_box
            iou_arr = iou_one_to_many(first, self._boxes[:n])
            dist_arr = center_distance_one_to_many(first, self._boxes[:n])
            core = p.w_iou * iou_arr - p.w_loc * dist_arr - p.alpha_bnd
            if p.boundary_length_weighting:
                vals = self._scores[:n] + p.w_bnd * (self._lengths[:n] * core)
            else:
                vals = self._scores[:n] + p.w_bnd * core
            if p.predecessor_horizon is not None:
                vals = np.where(
                    self._ends[:n] >= trk.start - p.predecessor_horizon, vals, -np.inf
                )
            k = int(np.argmax(vals))
            best = vals[k]
            if best > 0.0:
                tied = np.nonzero(vals == best)[0]
                pred_id = int(self._ids[tied].min()) if len(tied) > 1 else int(self._ids[k])
                contrib = float(best)
        self.tracklets[trk.id] = trk
        self.h_score[trk.id] = base + contrib
        self.pred[trk.id] = pred_id
        self.live_ids.append(trk.id)

    def best(self) -> tuple[int | None, float]:
        """Globally best chain: (ending tracklet id, score); ties take the lower id."""
        best_id = self._closed_best_id
        best_score = self._closed_best_score
        for tid in self.live_ids:
            h = self.h_score[tid]
            if h > best_score or (h == best_score and (best_id is None or tid < best_id)):
                best_score = h
                best_id = tid
        return best_id, best_score

    def best_hypothesis(self) -> TrackHypothesis:
        best_id, best_score = self.best()
        if best_id is None:
            raise StructuralError("no tracklets registered")
        chain = []
        cur: int | None = best_id
        while cur is not None:
            chain.append(cur)
            cur = self.pred[cur]
        chain.reverse()
        return TrackHypothesis(
            tracklets=tuple(chain),
            score=best_score,
            last_frame=self.tracklets[best_id].end,
        )


def select_output(dp: DpState, frame: FrameDetections, params: Hyperparams) -> TrackEntry:
    """Pick this frame's output box from the best chain.

    If the best chain has a detection at the current frame, that
    detection is the output.  Otherwise the fallback scores every
    current detection by its own score plus spatial consistency to the
    chain's last box, discounted by the frames elapsed since then.
    Empty frames yield an absent entry.
    """
    t = frame.frame
    best_id, _ = dp.best()
    if best_id is None:
        return TrackEntry(frame=t, box=None, confidence=0.0)
    trk = dp.tracklets[best_id]
    if trk.end == t:
        det = trk.detections[-1]
        return TrackEntry(frame=t, box=det.box, confidence=det.score)
    if not frame.detections:
        return TrackEntry(frame=t, box=None, confidence=0.0)
    b_last = trk.last_box
    gap = t - trk.end
    best_det: Detection | None = None
    best_val = -math.inf
    for det in frame.detections:
        val = (
            det.score
            + params.w_iou * iou(det.box, b_last)
            - params.w_loc * center_distance(det.box, b_last)
            - params.fallback_gap_penalty * gap
        )
        if val > best_val or (val == best_val and det.id < best_det.id):
            best_val = val
            best_det = det
    return TrackEntry(frame=t, box=best_det.box, confidence=best_det.score)


class RescoringEngine:
    """Strictly online tracker state: tracklet store plus chain DP.

    step() consumes frames in order and returns the per-frame output;
    nothing it does looks ahead, so replaying a prefix reproduces the
    same outputs.
    """

    def __init__(self, params: Hyperparams, b_ff: BoundingBox):
        self.params = params
        self.store = TrackletStore(params.join_threshold)
        self.dp = DpState(params, b_ff)

    def step(self, frame: FrameDetections) -> TrackEntry:
        upd = self.store.step(frame)
        self.dp.advance(frame.frame)
        self.dp.on_closed(upd.closed)
        for trk in upd.extended:
            self.dp.on_extended(trk, trk.detections[-1])
        for trk in upd.new:
            self.dp.on_birth(trk)
        return select_output(self.dp, frame, self.params)


def run_sequence(seq: Sequence, params: Hyperparams) -> TrackResult:
    """Run the full engine over a validated sequence."""
    engine = RescoringEngine(params, seq.first_frame_box)
    return TrackResult([engine.step(fd) for fd in seq.frames])


def run_no_rescoring(seq: Sequence, params: Hyperparams) -> TrackResult:
    """Baseline: per frame, the highest-scoring detection (ties: lower id)."""
    entries = []
    for fd in seq.frames:
        if not fd.detections:
            entries.append(TrackEntry(frame=fd.frame, box=None, confidence=0.0))
            continue
        best = fd.detections[0]
        for det in fd.detections[1:]:
            if det.score > best.score:
                best = det
        entries.append(TrackEntry(frame=fd.frame, box=best.box, confidence=best.score))
    return TrackResult(entries)


def run_dp_over_tracklets(
    tracklets: list[Tracklet], params: Hyperparams, b_ff: BoundingBox
) -> TrackHypothesis:
    """Feed a fixed tracklet set through the DP in frame order.

    Replays exactly the event order the engine would produce: per frame,
    closures first, then extensions, then births.  Used to exercise the
    DP against the exhaustive oracle without going through detection
    matching.
    """
    if not tracklets:
        raise StructuralError("no tracklets")
    state = DpState(params, b_ff)
    by_id = sorted(tracklets, key=lambda t: t.id)
    last = max(t.end for t in by_id)
    for t in range(last + 1):
        state.advance(t)
        state.on_closed([trk for trk in by_id if trk.end == t - 1 and trk.id in state.h_score])
        for trk in by_id:
            if trk.start < t <= trk.end:
                state.on_extended(trk, trk.detections[t - trk.start])
        for trk in by_id:
            if trk.start == t:
                state.on_birth(trk)
    return state.best_hypothesis()
