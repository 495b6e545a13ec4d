"""Online tracklet formation: one IoU-gated decomposition per sequence.

Each frame, detections either extend a tracklet that ended at the
previous frame or start a new one.  Matching is greedy over (detection,
tracklet) pairs ordered by descending IoU, so the decomposition is a
partition of the input detections and is fully deterministic.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .geometry import boxes_to_array, iou_matrix
from .model import Detection, FrameDetections, StructuralError, Tracklet

log = logging.getLogger(__name__)


def greedy_match(
    tracklet_boxes: np.ndarray,
    detections: list[Detection],
    det_boxes: np.ndarray,
    join_threshold: float,
) -> list[tuple[int, int]]:
    """Greedy one-to-one matching of detections onto tracklet last boxes.

    Candidate pairs are those with IoU >= join_threshold, taken in order
    of descending IoU; ties prefer the higher-scoring detection, then the
    lower detection id, then the lower tracklet index.

    Args:
        tracklet_boxes: (n, 4) xywh array of tracklet last boxes.
        detections: the frame's detections (for scores and ids).
        det_boxes: (m, 4) xywh array aligned with `detections`.
        join_threshold: the IoU gate.

    Returns:
        (tracklet_index, detection_index) pairs, each side used at most once.
    """
    if len(tracklet_boxes) == 0 or len(detections) == 0:
        return []
    ious = iou_matrix(tracklet_boxes, det_boxes)
    ti, di = np.nonzero(ious >= join_threshold)
    candidates = sorted(
        ((ti[k], di[k]) for k in range(len(ti))),
        key=lambda p: (
            -ious[p[0], p[1]],
            -detections[p[1]].score,
            detections[p[1]].id,
            p[0],
        ),
    )
    used_t: set[int] = set()
    used_d: set[int] = set()
    pairs = []
    for t, d in candidates:
        if t in used_t or d in used_d:
            continue
        used_t.add(t)
        used_d.add(d)
        pairs.append((int(t), int(d)))
    return pairs


@dataclass
class StepUpdate:
    """What one frame did to the store."""

    new: list[Tracklet] = field(default_factory=list)
    extended: list[Tracklet] = field(default_factory=list)
    closed: list[Tracklet] = field(default_factory=list)
    assignments: list[tuple[Detection, int]] = field(default_factory=list)


class TrackletStore:
    """Single-owner state machine over a sequence's tracklets.

    `live` tracklets end at the last processed frame and are the only
    extension targets; a tracklet that misses a frame closes permanently.
    """

    def __init__(self, join_threshold: float):
        if not (0.0 < join_threshold <= 1.0):
            raise ValueError(f"join_threshold must be in (0, 1], got {join_threshold}")
        self.join_threshold = join_threshold
        self.live: list[Tracklet] = []
        self.closed: list[Tracklet] = []
        self.next_id = 0
        self.last_frame = -1

    def all_tracklets(self) -> list[Tracklet]:
        return sorted(self.live + self.closed, key=lambda t: t.id)

    def step(self, frame: FrameDetections) -> StepUpdate:
        """Advance the store by one frame.

        Raises:
            StructuralError: frame index is not last_frame + 1.
        """
        if frame.frame != self.last_frame + 1:
            raise StructuralError(
                f"expected frame {self.last_frame + 1}, got {frame.frame}"
            )
        self.last_frame = frame.frame
        dets = list(frame.detections)
        upd = StepUpdate()

        if self.live and dets:
            t_boxes = boxes_to_array([t.last_box for t in self.live])
            d_boxes = boxes_to_array([d.box for d in dets])
            pairs = greedy_match(t_boxes, dets, d_boxes, self.join_threshold)
        else:
            pairs = []

        matched_t = {t for t, _ in pairs}
        matched_d = {d for _, d in pairs}
        for t, d in sorted(pairs, key=lambda p: p[0]):
            trk = self.live[t]
            trk.append(dets[d])
            upd.extended.append(trk)
            upd.assignments.append((dets[d], trk.id))

        upd.closed = [trk for i, trk in enumerate(self.live) if i not in matched_t]
        self.closed.extend(upd.closed)

        survivors = [trk for i, trk in enumerate(self.live) if i in matched_t]
        for i, det in enumerate(dets):
            if i in matched_d:
                continue
            trk = Tracklet(self.next_id, [det])
            self.next_id += 1
            upd.new.append(trk)
            upd.assignments.append((det, trk.id))
        survivors.extend(upd.new)
        survivors.sort(key=lambda t: t.id)
        self.live = survivors

        if log.isEnabledFor(logging.DEBUG):
            log.debug(
                "frame %d: %d extended, %d new, %d closed",
                frame.frame,
                len(upd.extended),
                len(upd.new),
                len(upd.closed),
            )
        return upd
