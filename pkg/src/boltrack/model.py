"""Domain types: detections, tracklets, track output, hyperparameters.

A sequence is a contiguous run of frames 0..T-1, each holding the external
detector's boxes for that frame.  validate_sequence() is the single entry
point that turns raw per-frame detections plus the first-frame reference
box into something the engine will accept.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace

from .geometry import BoundingBox


class StructuralError(ValueError):
    """Raised when input violates sequence or track structure."""


@dataclass(frozen=True, slots=True)
class Detection:
    """One detector output: a box with a real-valued score.

    Scores are whatever the upstream detector emits (logits are fine);
    they only ever enter additive comparisons.  `id` is unique within
    the detection's frame and encodes input order.
    """

    frame: int
    box: BoundingBox
    score: float
    id: int

    def __post_init__(self) -> None:
        if self.frame < 0:
            raise StructuralError(f"negative frame index {self.frame}")
        if not math.isfinite(self.score):
            raise StructuralError(f"non-finite detection score {self.score}")


@dataclass(frozen=True, slots=True)
class FrameDetections:
    """All detections of one frame, ids unique within the frame."""

    frame: int
    detections: tuple[Detection, ...]

    def __post_init__(self) -> None:
        seen = set()
        for d in self.detections:
            if d.frame != self.frame:
                raise StructuralError(
                    f"detection frame {d.frame} inside frame {self.frame}"
                )
            if d.id in seen:
                raise StructuralError(f"duplicate detection id {d.id} in frame {self.frame}")
            seen.add(d.id)


class Tracklet:
    """A maximal run of per-frame detections joined by the IoU gate.

    Holds one detection per consecutive frame.  Built incrementally by
    the tracklet store; everything downstream treats it as read-only.
    """

    __slots__ = ("id", "detections")

    def __init__(self, tracklet_id: int, detections: list[Detection]):
        if not detections:
            raise StructuralError("tracklet needs at least one detection")
        self.id = tracklet_id
        self.detections = detections

    @property
    def start(self) -> int:
        return self.detections[0].frame

    @property
    def end(self) -> int:
        return self.detections[-1].frame

    @property
    def length(self) -> int:
        return len(self.detections)

    @property
    def first_box(self) -> BoundingBox:
        return self.detections[0].box

    @property
    def last_box(self) -> BoundingBox:
        return self.detections[-1].box

    def append(self, det: Detection) -> None:
        if det.frame != self.end + 1:
            raise StructuralError(
                f"tracklet {self.id} ends at {self.end}, cannot append frame {det.frame}"
            )
        self.detections.append(det)

    def check_gate(self, join_threshold: float) -> bool:
        """True when every consecutive pair clears the joining IoU gate."""
        from .geometry import iou

        return all(
            iou(a.box, b.box) >= join_threshold
            for a, b in zip(self.detections, self.detections[1:])
        )

    def __repr__(self) -> str:
        return f"Tracklet(id={self.id}, frames={self.start}..{self.end})"


@dataclass(frozen=True, slots=True)
class TrackHypothesis:
    """An ordered chain of temporally disjoint tracklet ids with its score."""

    tracklets: tuple[int, ...]
    score: float
    last_frame: int


@dataclass(frozen=True, slots=True)
class TrackEntry:
    """Per-frame track output: a box with confidence, or absence."""

    frame: int
    box: BoundingBox | None
    confidence: float

    def __post_init__(self) -> None:
        if self.box is None and self.confidence != 0.0:
            raise StructuralError("absent entries carry confidence 0")
        if not math.isfinite(self.confidence):
            raise StructuralError(f"non-finite confidence {self.confidence}")

    @property
    def present(self) -> bool:
        return self.box is not None


class TrackResult:
    """One entry per frame 0..T-1, in frame order."""

    __slots__ = ("entries",)

    def __init__(self, entries: list[TrackEntry]):
        for i, e in enumerate(entries):
            if e.frame != i:
                raise StructuralError(f"track entry {i} has frame {e.frame}")
        self.entries = entries

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, i: int) -> TrackEntry:
        return self.entries[i]

    def __eq__(self, other) -> bool:
        if not isinstance(other, TrackResult):
            return NotImplemented
        return self.entries == other.entries

    def __repr__(self) -> str:
        n_present = sum(1 for e in self.entries if e.present)
        return f"TrackResult({len(self.entries)} frames, {n_present} present)"


@dataclass(frozen=True, slots=True)
class Hyperparams:
    """Engine weights and plumbing knobs.

    The defaults are the engine's reference operating point; the score
    weights all enter linearly so only their ratios matter.

    Attributes:
        join_threshold: IoU gate for extending a tracklet, in (0, 1].
        w_ff: weight of the aspect-ratio similarity term per detection.
        alpha_ff: shift subtracted inside the aspect-ratio term.
        w_bnd: weight of the boundary term between chained tracklets.
        w_iou: IoU weight inside boundary and fallback scoring.
        w_loc: center-distance weight inside boundary and fallback scoring.
        alpha_bnd: constant penalty inside the boundary term.
        boundary_length_weighting: scale the boundary term by the length
            of the preceding tracklet (the literal per-frame-sum reading)
            instead of counting it once.
        fallback_gap_penalty: per-frame penalty on the gap since the
            chosen hypothesis last had a detection, applied in fallback
            selection only.
        s_ff: score assigned to the injected first-frame reference
            detection; None means the maximum score observed in the
            sequence.
        det_cap: per-frame detection cap; the top-scoring are kept.
        predecessor_horizon: only chain to tracklets that ended within
            this many frames; None means unlimited.
    """

    join_threshold: float = 0.7
    w_ff: float = 1.0
    alpha_ff: float = 0.5
    w_bnd: float = 1.0
    w_iou: float = 1.0
    w_loc: float = 0.002
    alpha_bnd: float = 0.1
    boundary_length_weighting: bool = True
    fallback_gap_penalty: float = 0.05
    s_ff: float | None = None
    det_cap: int = 100
    predecessor_horizon: int | None = None

    def __post_init__(self) -> None:
        if not (0.0 < self.join_threshold <= 1.0):
            raise ValueError(f"join_threshold must be in (0, 1], got {self.join_threshold}")
        for name in ("w_ff", "w_bnd", "w_iou", "w_loc", "fallback_gap_penalty"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {v}")
        for name in ("alpha_ff", "alpha_bnd"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v}")
        if self.s_ff is not None and not math.isfinite(self.s_ff):
            raise ValueError(f"s_ff must be finite, got {self.s_ff}")
        if self.det_cap < 1:
            raise ValueError(f"det_cap must be >= 1, got {self.det_cap}")
        if self.predecessor_horizon is not None and self.predecessor_horizon < 0:
            raise ValueError(
                f"predecessor_horizon must be >= 0 or None, got {self.predecessor_horizon}"
            )


DEFAULT_PARAMS = Hyperparams()


@dataclass(frozen=True)
class Sequence:
    """A validated detection sequence ready for the engine.

    Frame 0 starts with the injected reference detection (id 0, score
    s_ff); every frame respects the detection cap.
    """

    frames: tuple[FrameDetections, ...]
    first_frame_box: BoundingBox
    s_ff: float

    def __len__(self) -> int:
        return len(self.frames)


def _cap_frame(dets: list[Detection], cap: int) -> list[Detection]:
    if len(dets) <= cap:
        return dets
    # keep the top-scoring; ties keep the earlier id; restore input order
    ranked = sorted(dets, key=lambda d: (-d.score, d.id))[:cap]
    ranked.sort(key=lambda d: d.id)
    return ranked


def validate_sequence(
    frames: list[FrameDetections],
    first_frame_box: BoundingBox,
    params: Hyperparams = DEFAULT_PARAMS,
) -> Sequence:
    """Check sequence structure and inject the first-frame reference.

    Args:
        frames: per-frame detections, one entry per frame, sorted.
        first_frame_box: the reference box the track starts from.
        params: supplies s_ff and the per-frame detection cap.

    Returns:
        A Sequence whose frame 0 holds the reference box as detection
        id 0 with score s_ff (existing frame-0 ids are shifted up).

    Raises:
        StructuralError: empty input, or frame indices not 0..T-1.
    """
    if not frames:
        raise StructuralError("no frames")
    for i, fd in enumerate(frames):
        if fd.frame != i:
            raise StructuralError(
                f"frames must be contiguous from 0; position {i} holds frame {fd.frame}"
            )

    if params.s_ff is not None:
        s_ff = params.s_ff
    else:
        scores = [d.score for fd in frames for d in fd.detections]
        s_ff = max(scores) if scores else 1.0

    anchor = Detection(frame=0, box=first_frame_box, score=s_ff, id=0)
    frame0 = [anchor] + [replace(d, id=d.id + 1) for d in frames[0].detections]

    out = []
    for i, fd in enumerate(frames):
        dets = frame0 if i == 0 else list(fd.detections)
        out.append(FrameDetections(frame=i, detections=tuple(_cap_frame(dets, params.det_cap))))
    return Sequence(frames=tuple(out), first_frame_box=first_frame_box, s_ff=s_ff)


def hyperparams_fields() -> list[str]:
    """Config key names, in declaration order."""
    return [f.name for f in fields(Hyperparams)]
