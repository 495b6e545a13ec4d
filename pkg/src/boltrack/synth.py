"""Synthetic scenarios and brute-force oracles.

The generator draws every random quantity from a single Mersenne
Twister stream (stdlib random.Random, seeded with the scenario's
integer seed) using only Random.random(); gaussians come from an
explicit Box-Muller transform.  The draw order is fixed and documented
on generate(), so a scenario spec plus seed pins the output exactly,
independent of platform.

Ground-truth absence runs are constructed, not sampled: the run count
and total absent frames always recount to the spec's values.
"""

from __future__ import annotations

import logging
import math
import random
from dataclasses import dataclass

from .geometry import BoundingBox, iou
from .model import (
    Detection,
    FrameDetections,
    Hyperparams,
    TrackEntry,
    TrackHypothesis,
    Tracklet,
    TrackResult,
)

log = logging.getLogger(__name__)

ORACLE_MAX_TRACKLETS = 12
ORACLE_MAX_MATCH = 8


class ScenarioError(ValueError):
    """Inconsistent or infeasible scenario parameters."""


@dataclass(frozen=True)
class ScenarioSpec:
    """Everything that defines one synthetic sequence.

    Attributes:
        frames: sequence length T.
        image_width, image_height: scene extent in pixels.
        target_width, target_height: fixed ground-truth box size.
        waypoints: explicit (x, y) path corners for the target center;
            None draws n_waypoints of them.
        n_waypoints: corners to draw when waypoints is None.
        max_speed: upper bound on per-frame center motion, pixels.
        base_score: detector score of the target before noise.
        n_disappearances: absence runs in the ground truth.
        mean_absence: mean run length in frames; the total absent frame
            count is round(n_disappearances * mean_absence) exactly.
        n_distractors: independent decoy objects.  They share the
            target's box size, score base_score + distractor_score_bias,
            and teleport every ~distractor_hold frames, so they are
            score-competitive but temporally inconsistent.
        distractor_score_bias: score offset of distractors.
        distractor_hold: mean frames between distractor teleports.
        detection_noise: std of additive box jitter, pixels.
        score_noise: std of additive score noise.
        miss_rate: probability a true detection is dropped.
        seed: integer seed for the whole scenario.
    """

    frames: int
    image_width: float = 1280.0
    image_height: float = 720.0
    target_width: float = 80.0
    target_height: float = 60.0
    waypoints: tuple[tuple[float, float], ...] | None = None
    n_waypoints: int = 4
    max_speed: float = 3.0
    base_score: float = 0.7
    n_disappearances: int = 0
    mean_absence: float = 0.0
    n_distractors: int = 0
    distractor_score_bias: float = 0.1
    distractor_hold: int = 25
    detection_noise: float = 0.0
    score_noise: float = 0.0
    miss_rate: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.frames < 1:
            raise ScenarioError(f"frames must be >= 1, got {self.frames}")
        if self.image_width <= 0 or self.image_height <= 0:
            raise ScenarioError("image size must be positive")
        if self.target_width <= 0 or self.target_height <= 0:
            raise ScenarioError("target size must be positive")
        if self.waypoints is not None and len(self.waypoints) < 1:
            raise ScenarioError("waypoints must hold at least one point")
        if self.n_waypoints < 1:
            raise ScenarioError("n_waypoints must be >= 1")
        if self.max_speed < 0:
            raise ScenarioError("max_speed must be >= 0")
        if not (0.0 <= self.miss_rate <= 1.0):
            raise ScenarioError(f"miss_rate must be in [0, 1], got {self.miss_rate}")
        for name in ("detection_noise", "score_noise"):
            if getattr(self, name) < 0:
                raise ScenarioError(f"{name} must be >= 0")
        if self.n_distractors < 0:
            raise ScenarioError("n_distractors must be >= 0")
        if self.distractor_hold < 1:
            raise ScenarioError("distractor_hold must be >= 1")
        if self.n_disappearances < 0:
            raise ScenarioError("n_disappearances must be >= 0")
        if self.n_disappearances > 0:
            if self.mean_absence < 1.0:
                raise ScenarioError("mean_absence must be >= 1 when disappearances occur")
            total_absent = round(self.n_disappearances * self.mean_absence)
            visible = self.frames - total_absent
            # every absence run is flanked by presence, so n+1 visible segments
            if visible < self.n_disappearances + 1:
                raise ScenarioError(
                    f"{total_absent} absent frames leave no room for "
                    f"{self.n_disappearances} flanked absence runs in {self.frames} frames"
                )


def _gauss(rng: random.Random) -> float:
    # Box-Muller from two uniform draws; the sine branch is discarded so
    # every gaussian costs exactly two Random.random() calls.
    u1 = rng.random()
    u2 = rng.random()
    return math.sqrt(-2.0 * math.log(1.0 - u1)) * math.cos(2.0 * math.pi * u2)


def _composition(rng: random.Random, total: int, parts: int) -> list[int]:
    """Split `total` into `parts` integers, each >= 1, summing exactly.

    Consumes exactly `parts` uniform draws.  The surplus over the
    mandatory 1 per part is shared proportionally to the draws, with the
    remainder going to the largest fractional shares (ties: lower index).
    """
    if total < parts:
        raise ScenarioError(f"cannot split {total} into {parts} parts of >= 1")
    weights = [rng.random() for _ in range(parts)]
    surplus = total - parts
    s = sum(weights)
    if s <= 0.0:
        shares = [surplus / parts] * parts
    else:
        shares = [w / s * surplus for w in weights]
    out = [1 + int(sh) for sh in shares]
    remainder = total - sum(out)
    order = sorted(range(parts), key=lambda i: (-(shares[i] - int(shares[i])), i))
    for i in range(remainder):
        out[order[i]] += 1
    return out


class _Polyline:
    """Constant-speed traversal of a waypoint path."""

    def __init__(self, points: list[tuple[float, float]], max_speed: float, frames: int):
        self.points = points
        self.cum = [0.0]
        for (x0, y0), (x1, y1) in zip(points, points[1:]):
            self.cum.append(self.cum[-1] + math.sqrt((x1 - x0) ** 2 + (y1 - y0) ** 2))
        total = self.cum[-1]
        self.speed = min(max_speed, total / max(1, frames - 1)) if total > 0 else 0.0

    def at(self, t: int) -> tuple[float, float]:
        if len(self.points) == 1 or self.speed == 0.0:
            return self.points[0]
        s = min(self.speed * t, self.cum[-1])
        for k in range(1, len(self.cum)):
            if s <= self.cum[k]:
                seg = self.cum[k] - self.cum[k - 1]
                f = 0.0 if seg == 0 else (s - self.cum[k - 1]) / seg
                x0, y0 = self.points[k - 1]
                x1, y1 = self.points[k]
                return (x0 + f * (x1 - x0), y0 + f * (y1 - y0))
        return self.points[-1]


def _presence(spec: ScenarioSpec, rng: random.Random) -> list[bool]:
    present = [True] * spec.frames
    if spec.n_disappearances == 0:
        return present
    total_absent = round(spec.n_disappearances * spec.mean_absence)
    runs = _composition(rng, total_absent, spec.n_disappearances)
    visibles = _composition(
        rng, spec.frames - total_absent, spec.n_disappearances + 1
    )
    t = 0
    for i, run in enumerate(runs):
        t += visibles[i]
        for k in range(run):
            present[t + k] = False
        t += run
    return present


def _box_at(cx: float, cy: float, w: float, h: float) -> BoundingBox:
    return BoundingBox(cx - w / 2, cy - h / 2, w, h)


class _Distractor:
    __slots__ = ("x", "y", "vx", "vy", "hold")

    def __init__(self):
        self.x = 0.0
        self.y = 0.0
        self.vx = 0.0
        self.vy = 0.0
        self.hold = 0

    def respawn(self, rng: random.Random, spec: ScenarioSpec, lo, hi) -> None:
        # five draws: x, y, heading, speed, hold
        self.x = lo[0] + rng.random() * (hi[0] - lo[0])
        self.y = lo[1] + rng.random() * (hi[1] - lo[1])
        heading = 2.0 * math.pi * rng.random()
        speed = spec.max_speed * rng.random()
        self.vx = speed * math.cos(heading)
        self.vy = speed * math.sin(heading)
        self.hold = max(1, round(spec.distractor_hold * (0.5 + rng.random())))


def generate(spec: ScenarioSpec) -> tuple[list[FrameDetections], TrackResult]:
    """Produce (per-frame detections, ground-truth track) for a scenario.

    Draw order, all from one Random(seed) stream:
      1. target waypoints (x then y per corner; skipped when explicit),
      2. absence run lengths, then visible segment lengths,
      3. initial distractor states (x, y, heading, speed, hold each),
      4. per frame t = 0..T-1:
         a. the target, when present and t > 0: one miss draw, then on
            keep four box-jitter gaussians (x, y, w, h) and one score
            gaussian, two uniforms each.  Frame 0 emits the clean target
            box at base_score with no draws.
         b. each distractor in index order: five respawn draws when its
            hold expired, one miss draw, then jitter and score gaussians
            as above.

    Ground truth is exact: target boxes on the waypoint path, absence
    runs precisely as constructed.
    """
    rng = random.Random(spec.seed)
    tw, th = spec.target_width, spec.target_height
    margin = max(tw, th) / 2.0
    lo = (min(margin, spec.image_width / 2), min(margin, spec.image_height / 2))
    hi = (max(spec.image_width - margin, lo[0]), max(spec.image_height - margin, lo[1]))

    if spec.waypoints is not None:
        points = [(float(x), float(y)) for x, y in spec.waypoints]
    else:
        points = [
            (lo[0] + rng.random() * (hi[0] - lo[0]), lo[1] + rng.random() * (hi[1] - lo[1]))
            for _ in range(spec.n_waypoints)
        ]
    path = _Polyline(points, spec.max_speed, spec.frames)

    present = _presence(spec, rng)

    distractors = [_Distractor() for _ in range(spec.n_distractors)]
    for d in distractors:
        d.respawn(rng, spec, lo, hi)

    def jittered(cx: float, cy: float, score: float) -> tuple[BoundingBox, float]:
        dx = _gauss(rng) * spec.detection_noise
        dy = _gauss(rng) * spec.detection_noise
        dw = _gauss(rng) * spec.detection_noise
        dh = _gauss(rng) * spec.detection_noise
        ds = _gauss(rng) * spec.score_noise
        w = max(1.0, tw + dw)
        h = max(1.0, th + dh)
        return _box_at(cx + dx, cy + dy, w, h), score + ds

    frames: list[FrameDetections] = []
    gt_entries: list[TrackEntry] = []
    for t in range(spec.frames):
        cx, cy = path.at(t)
        dets: list[Detection] = []

        if present[t]:
            gt_entries.append(TrackEntry(frame=t, box=_box_at(cx, cy, tw, th), confidence=1.0))
            if t == 0:
                dets.append(
                    Detection(frame=0, box=_box_at(cx, cy, tw, th), score=spec.base_score, id=0)
                )
            elif rng.random() >= spec.miss_rate:
                # a miss still consumes its draw, keeping the stream aligned
                box, score = jittered(cx, cy, spec.base_score)
                dets.append(Detection(frame=t, box=box, score=score, id=len(dets)))
        else:
            gt_entries.append(TrackEntry(frame=t, box=None, confidence=0.0))

        for d in distractors:
            if d.hold == 0:
                d.respawn(rng, spec, lo, hi)
            elif t > 0:
                d.x += d.vx
                d.y += d.vy
            d.hold -= 1
            if rng.random() >= spec.miss_rate:
                box, score = jittered(
                    d.x, d.y, spec.base_score + spec.distractor_score_bias
                )
                dets.append(Detection(frame=t, box=box, score=score, id=len(dets)))

        frames.append(FrameDetections(frame=t, detections=tuple(dets)))

    return frames, TrackResult(gt_entries)


def _hash01(seed: int) -> float:
    return ((seed * 2654435761) % (2**32)) / 2**32


def lt_preset(seed: int, frames: int = 4200, n_distractors: int = 3) -> ScenarioSpec:
    """Long-absence benchmark scenario.

    Calibrated to 12.4 disappearances per 4200 frames with 40.6-frame
    mean absences; the per-sequence count is dithered from the seed so a
    fleet of seeds matches the rate in expectation, scaled to `frames`.
    """
    mu = 12.4 * frames / 4200.0
    base = int(mu)
    n_dis = base + (1 if _hash01(seed) < mu - base else 0)
    return ScenarioSpec(
        frames=frames,
        image_width=1280.0,
        image_height=720.0,
        target_width=80.0,
        target_height=60.0,
        n_waypoints=6,
        max_speed=3.0,
        base_score=0.7,
        n_disappearances=n_dis,
        mean_absence=40.6,
        n_distractors=n_distractors,
        distractor_score_bias=0.1,
        distractor_hold=20,
        detection_noise=1.5,
        score_noise=0.05,
        miss_rate=0.05,
        seed=seed,
    )


# --- scenario files ----------------------------------------------------------

_SCENARIO_INT_FIELDS = (
    "frames",
    "n_waypoints",
    "n_disappearances",
    "n_distractors",
    "distractor_hold",
    "seed",
)
_SCENARIO_FLOAT_FIELDS = (
    "image_width",
    "image_height",
    "target_width",
    "target_height",
    "max_speed",
    "base_score",
    "mean_absence",
    "distractor_score_bias",
    "detection_noise",
    "score_noise",
    "miss_rate",
)


def _parse_waypoints(text: str) -> tuple[tuple[float, float], ...]:
    points = []
    for token in text.split():
        x, sep, y = token.partition(":")
        if not sep:
            raise ValueError(f"waypoint {token!r} is not x:y")
        points.append((float(x), float(y)))
    if not points:
        raise ValueError("empty waypoint list")
    return tuple(points)


def load_scenario(path) -> ScenarioSpec:
    """Read a scenario from a flat key = value file.

    Same syntax as the hyperparameter config; waypoints, when given, are
    space-separated x:y pairs.  Unknown keys are rejected.
    """
    from .io import read_kv_file

    kwargs = {}
    for key, (text, lineno) in read_kv_file(path).items():
        try:
            if key in _SCENARIO_INT_FIELDS:
                kwargs[key] = int(text)
            elif key in _SCENARIO_FLOAT_FIELDS:
                kwargs[key] = float(text)
            elif key == "waypoints":
                kwargs[key] = _parse_waypoints(text)
            else:
                raise ScenarioError(f"{path}:{lineno}: unknown key {key!r}")
        except ValueError as e:
            if isinstance(e, ScenarioError):
                raise
            raise ScenarioError(f"{path}:{lineno}: bad value for {key}: {text!r}") from None
    if "frames" not in kwargs:
        raise ScenarioError(f"{path}: missing required key 'frames'")
    return ScenarioSpec(**kwargs)


def write_scenario(spec: ScenarioSpec, path) -> None:
    """Write a scenario in the format load_scenario reads."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for name in _SCENARIO_INT_FIELDS:
            f.write(f"{name} = {getattr(spec, name)}\n")
        for name in _SCENARIO_FLOAT_FIELDS:
            f.write(f"{name} = {getattr(spec, name)!r}\n")
        if spec.waypoints is not None:
            f.write("waypoints = " + " ".join(f"{x!r}:{y!r}" for x, y in spec.waypoints) + "\n")


# --- brute-force oracles ---------------------------------------------------


def _chain_score(
    chain: list[Tracklet], params: Hyperparams, b_ff: BoundingBox
) -> float:
    # Independent composition of the scoring: aspect-ratio similarity and
    # the boundary term are written out here rather than taken from the
    # engine, so the DP and this enumeration only share box primitives.
    ra = b_ff.w / b_ff.h
    total = 0.0
    prev: Tracklet | None = None
    for trk in chain:
        for det in trk.detections:
            rb = det.box.w / det.box.h
            sim = min(ra / rb, rb / ra)
            total += det.score + params.w_ff * (sim - params.alpha_ff)
        if prev is not None:
            a = prev.last_box
            b = trk.first_box
            dx = (a.x + a.w / 2) - (b.x + b.w / 2)
            dy = (a.y + a.h / 2) - (b.y + b.h / 2)
            core = (
                params.w_iou * iou(a, b)
                - params.w_loc * math.sqrt(dx * dx + dy * dy)
                - params.alpha_bnd
            )
            length = prev.length if params.boundary_length_weighting else 1
            total += params.w_bnd * (length * core)
        prev = trk
    return total


def _enumerate_chains(tracklets: list[Tracklet]):
    """Yield every temporally valid nonempty chain, as index tuples."""
    order = sorted(range(len(tracklets)), key=lambda i: (tracklets[i].start, tracklets[i].id))
    n = len(order)
    for mask in range(1, 1 << n):
        chain = [tracklets[order[i]] for i in range(n) if mask >> i & 1]
        ok = all(a.end < b.start for a, b in zip(chain, chain[1:]))
        if ok:
            yield chain


def oracle_best_hypothesis(
    tracklets: list[Tracklet], params: Hyperparams, b_ff: BoundingBox
) -> TrackHypothesis:
    """Exhaustive maximum over all valid chains of the given tracklets.

    Mirrors the DP's tie rule: among equal scores, the chain whose ids
    read backwards compare smallest wins (a missing predecessor sorts
    before any id), which is what chaining ties toward no-predecessor
    and then lower ids produces.

    Raises:
        ValueError: more than ORACLE_MAX_TRACKLETS tracklets.
    """
    if not tracklets:
        raise ValueError("no tracklets")
    if len(tracklets) > ORACLE_MAX_TRACKLETS:
        raise ValueError(
            f"oracle is exponential; refusing {len(tracklets)} > {ORACLE_MAX_TRACKLETS} tracklets"
        )
    best_chain: list[Tracklet] | None = None
    best_score = -math.inf
    best_key: tuple[int, ...] | None = None
    for chain in _enumerate_chains(tracklets):
        score = _chain_score(chain, params, b_ff)
        key = tuple(t.id for t in reversed(chain))
        if score > best_score or (score == best_score and key < best_key):
            best_chain = chain
            best_score = score
            best_key = key
    return TrackHypothesis(
        tracklets=tuple(t.id for t in best_chain),
        score=best_score,
        last_frame=best_chain[-1].end,
    )


def oracle_matching(
    tracklet_boxes: list[BoundingBox],
    det_boxes: list[BoundingBox],
    join_threshold: float,
) -> float:
    """Maximum total IoU over one-to-one gated assignments, exhaustively.

    Raises:
        ValueError: either side exceeds ORACLE_MAX_MATCH.
    """
    if len(tracklet_boxes) > ORACLE_MAX_MATCH or len(det_boxes) > ORACLE_MAX_MATCH:
        raise ValueError(f"oracle matching capped at {ORACLE_MAX_MATCH} per side")
    gated = [
        [
            (j, iou(db, tb))
            for j, tb in enumerate(tracklet_boxes)
            if iou(db, tb) >= join_threshold
        ]
        for db in det_boxes
    ]
    cache: dict[tuple[int, int], float] = {}

    def go(i: int, used: int) -> float:
        if i == len(det_boxes):
            return 0.0
        key = (i, used)
        if key in cache:
            return cache[key]
        best = go(i + 1, used)
        for j, v in gated[i]:
            if not used >> j & 1:
                best = max(best, v + go(i + 1, used | 1 << j))
        cache[key] = best
        return best

    return go(0, 0)


def random_dp_instance(
    seed: int, max_tracklets: int = 10, max_frames: int = 30
) -> tuple[list[Tracklet], Hyperparams, BoundingBox]:
    """A seeded random tracklet set plus hyperparameters for DP testing.

    Tracklet boxes random-walk with steps small enough to clear the
    sampled join gate, scores span negative to positive, and every
    weight is drawn fresh, so the DP sees arbitrary operating points.
    """
    rng = random.Random(seed)
    thr = 0.5 + 0.4 * rng.random()
    params = Hyperparams(
        join_threshold=thr,
        w_ff=2.0 * rng.random(),
        alpha_ff=rng.random(),
        w_bnd=2.0 * rng.random(),
        w_iou=2.0 * rng.random(),
        w_loc=0.01 * rng.random(),
        alpha_bnd=0.5 * rng.random(),
        boundary_length_weighting=rng.random() < 0.5,
    )
    b_ff = BoundingBox(
        rng.random() * 500, rng.random() * 500, 20 + rng.random() * 100, 20 + rng.random() * 100
    )
    n = 1 + int(rng.random() * max_tracklets)
    # step fraction that keeps consecutive IoU above thr for fixed-size boxes
    delta = (1.0 - math.sqrt(2.0 * thr / (1.0 + thr))) * 0.9
    specs = []
    for _ in range(n):
        start = int(rng.random() * max_frames)
        length = 1 + int(rng.random() * min(max_frames - start, 12))
        specs.append((start, length))
    specs.sort()
    tracklets = []
    for tid, (start, length) in enumerate(specs):
        w = 20 + rng.random() * 100
        h = 20 + rng.random() * 100
        x = rng.random() * 500
        y = rng.random() * 500
        dets = []
        for k in range(length):
            dets.append(
                Detection(
                    frame=start + k,
                    box=BoundingBox(x, y, w, h),
                    score=-1.0 + 2.5 * rng.random(),
                    id=tid,
                )
            )
            x += (2.0 * rng.random() - 1.0) * delta * w
            y += (2.0 * rng.random() - 1.0) * delta * h
        tracklets.append(Tracklet(tid, dets))
    return tracklets, params, b_ff
