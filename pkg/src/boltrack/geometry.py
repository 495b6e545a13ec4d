"""Axis-aligned box primitives: IoU, centers, aspect-ratio similarity.

All boxes are (x, y, w, h) with (x, y) the top-left corner and w, h > 0.
The vectorized variants mirror the scalar formulas operation for operation
so that scalar and array paths produce bit-identical floats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class BoxError(ValueError):
    """Raised for degenerate or non-finite box parameters."""


@dataclass(frozen=True, slots=True)
class BoundingBox:
    """Axis-aligned box, top-left anchored, strictly positive extent."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self) -> None:
        for v in (self.x, self.y, self.w, self.h):
            if not math.isfinite(v):
                raise BoxError(f"non-finite box field: {self!r}")
        if self.w <= 0 or self.h <= 0:
            raise BoxError(f"box needs w > 0 and h > 0, got w={self.w}, h={self.h}")

    @property
    def area(self) -> float:
        return self.w * self.h

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x, self.y, self.w, self.h)


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union of two boxes, in [0, 1]."""
    ax2 = a.x + a.w
    ay2 = a.y + a.h
    bx2 = b.x + b.w
    by2 = b.y + b.h
    iw = min(ax2, bx2) - max(a.x, b.x)
    ih = min(ay2, by2) - max(a.y, b.y)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    # areas from the same corner differences as the intersection, so
    # inter <= min(area) and iou(a, a) == 1.0 hold exactly in floats
    area_a = (ax2 - a.x) * (ay2 - a.y)
    area_b = (bx2 - b.x) * (by2 - b.y)
    union = area_a + area_b - inter
    return inter / union


def center(b: BoundingBox) -> tuple[float, float]:
    return (b.x + b.w / 2, b.y + b.h / 2)


def center_distance(a: BoundingBox, b: BoundingBox) -> float:
    """Euclidean distance between box centers, in pixels."""
    # sqrt(dx*dx + dy*dy) rather than hypot: the vectorized variant must
    # produce the same floats, and np.hypot and math.hypot can disagree
    # in the last ulp.
    ax, ay = center(a)
    bx, by = center(b)
    dx = ax - bx
    dy = ay - by
    return math.sqrt(dx * dx + dy * dy)


def aspect_ratio(b: BoundingBox) -> float:
    return b.w / b.h


def ff_score(b_ff: BoundingBox, b: BoundingBox, alpha_ff: float) -> float:
    """Aspect-ratio similarity of b to the reference b_ff, shifted by alpha_ff.

    Symmetric ratio min(r, 1/r) of the two aspect ratios, so the value is
    at most 1 - alpha_ff, reached exactly when the ratios match.
    """
    ra = aspect_ratio(b_ff)
    rb = aspect_ratio(b)
    return min(ra / rb, rb / ra) - alpha_ff


# --- vectorized variants -------------------------------------------------
#
# Boxes as float64 arrays of shape (n, 4) in xywh column order.  The
# expressions below keep the scalar operation order, which matters: the
# tracklet gate and the boundary search compare these values against
# scalar recomputations in tests.


def boxes_to_array(boxes) -> np.ndarray:
    """Stack BoundingBox objects into an (n, 4) xywh float64 array."""
    out = np.empty((len(boxes), 4), dtype=np.float64)
    for i, b in enumerate(boxes):
        out[i, 0] = b.x
        out[i, 1] = b.y
        out[i, 2] = b.w
        out[i, 3] = b.h
    return out


def iou_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise IoU of (n, 4) and (m, 4) xywh arrays -> (n, m)."""
    ax, ay, aw, ah = a[:, 0:1], a[:, 1:2], a[:, 2:3], a[:, 3:4]
    bx, by, bw, bh = b[:, 0], b[:, 1], b[:, 2], b[:, 3]
    ax2, ay2 = ax + aw, ay + ah
    bx2, by2 = bx + bw, by + bh
    iw = np.minimum(ax2, bx2) - np.maximum(ax, bx)
    ih = np.minimum(ay2, by2) - np.maximum(ay, by)
    np.clip(iw, 0.0, None, out=iw)
    np.clip(ih, 0.0, None, out=ih)
    inter = iw * ih
    union = (ax2 - ax) * (ay2 - ay) + (bx2 - bx) * (by2 - by) - inter
    return inter / union


def iou_one_to_many(box: BoundingBox, arr: np.ndarray) -> np.ndarray:
    """IoU of one box against an (n, 4) xywh array -> (n,)."""
    x2 = box.x + box.w
    y2 = box.y + box.h
    bx2 = arr[:, 0] + arr[:, 2]
    by2 = arr[:, 1] + arr[:, 3]
    iw = np.minimum(x2, bx2) - np.maximum(box.x, arr[:, 0])
    ih = np.minimum(y2, by2) - np.maximum(box.y, arr[:, 1])
    np.clip(iw, 0.0, None, out=iw)
    np.clip(ih, 0.0, None, out=ih)
    inter = iw * ih
    union = (x2 - box.x) * (y2 - box.y) + (bx2 - arr[:, 0]) * (by2 - arr[:, 1]) - inter
    return inter / union


def center_distance_one_to_many(box: BoundingBox, arr: np.ndarray) -> np.ndarray:
    """Center distance of one box against an (n, 4) xywh array -> (n,)."""
    cx = box.x + box.w / 2
    cy = box.y + box.h / 2
    dx = (arr[:, 0] + arr[:, 2] / 2) - cx
    dy = (arr[:, 1] + arr[:, 3] / 2) - cy
    return np.sqrt(dx * dx + dy * dy)
