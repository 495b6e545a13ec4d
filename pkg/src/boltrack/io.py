"""File formats: detections, ground truth, track results, flat configs.

Readers reject malformed input with the offending line number rather
than repairing it.  Writers emit floats via repr(), so write followed
by read is the identity on every finite value.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import replace
from pathlib import Path

from .geometry import BoundingBox, BoxError
from .model import (
    Detection,
    FrameDetections,
    Hyperparams,
    StructuralError,
    TrackEntry,
    TrackResult,
    hyperparams_fields,
)

log = logging.getLogger(__name__)

DETECTION_FIELDS = ("frame", "x", "y", "w", "h", "score")


class ParseError(ValueError):
    """Malformed file content; carries path and 1-based line number."""

    def __init__(self, path, lineno: int, message: str):
        super().__init__(f"{path}:{lineno}: {message}")
        self.path = path
        self.lineno = lineno


class ConfigError(ValueError):
    """Bad key, type, or range in a flat config file."""


def _fmt(v: float) -> str:
    return repr(float(v))


def _parse_float(text: str, path, lineno: int, name: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise ParseError(path, lineno, f"bad {name}: {text!r}") from None
    if not math.isfinite(v):
        raise ParseError(path, lineno, f"non-finite {name}: {text!r}")
    return v


def _parse_int(text: str, path, lineno: int, name: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ParseError(path, lineno, f"bad {name}: {text!r}") from None


def _split_csv(line: str, path, lineno: int, n: int) -> list[str]:
    parts = [p.strip() for p in line.split(",")]
    if len(parts) != n:
        raise ParseError(path, lineno, f"expected {n} comma-separated fields, got {len(parts)}")
    return parts


# --- detections -----------------------------------------------------------


def infer_format(path) -> str:
    suffix = Path(path).suffix.lower()
    if suffix == ".csv":
        return "csv"
    if suffix == ".jsonl":
        return "jsonl"
    raise ValueError(f"cannot infer format from {path!r}; pass csv or jsonl explicitly")


def _detection_record(
    path, lineno: int, frame: int, x: float, y: float, w: float, h: float, score: float
) -> tuple[int, BoundingBox, float]:
    if frame < 0:
        raise ParseError(path, lineno, f"negative frame index {frame}")
    try:
        box = BoundingBox(x, y, w, h)
    except BoxError as e:
        raise ParseError(path, lineno, str(e)) from None
    if not math.isfinite(score):
        raise ParseError(path, lineno, f"non-finite score {score}")
    return frame, box, score


def read_detections(path, fmt: str | None = None) -> list[FrameDetections]:
    """Read a detection file into per-frame groups.

    Records may arrive in any frame order; within a frame, input order is
    preserved and becomes detection ids 0..n-1.  Frames up to the maximum
    index that never appear are materialized empty.

    Args:
        path: file to read.
        fmt: "csv" or "jsonl"; None infers from the extension.

    Returns:
        One FrameDetections per frame 0..max_frame.

    Raises:
        ParseError: malformed record, with its line number.
        StructuralError: file holds no records.
    """
    fmt = fmt or infer_format(path)
    if fmt not in ("csv", "jsonl"):
        raise ValueError(f"unknown detection format {fmt!r}")
    records: list[tuple[int, BoundingBox, float]] = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            if fmt == "csv":
                parts = _split_csv(line, path, lineno, 6)
                frame = _parse_int(parts[0], path, lineno, "frame")
                x, y, w, h, score = (
                    _parse_float(parts[i], path, lineno, DETECTION_FIELDS[i])
                    for i in range(1, 6)
                )
            else:
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as e:
                    raise ParseError(path, lineno, f"bad JSON: {e.msg}") from None
                if not isinstance(obj, dict):
                    raise ParseError(path, lineno, "expected a JSON object")
                extra = set(obj) - set(DETECTION_FIELDS)
                if extra:
                    raise ParseError(path, lineno, f"unknown keys: {sorted(extra)}")
                missing = set(DETECTION_FIELDS) - set(obj)
                if missing:
                    raise ParseError(path, lineno, f"missing keys: {sorted(missing)}")
                if not isinstance(obj["frame"], int) or isinstance(obj["frame"], bool):
                    raise ParseError(path, lineno, f"bad frame: {obj['frame']!r}")
                frame = obj["frame"]
                vals = []
                for name in DETECTION_FIELDS[1:]:
                    v = obj[name]
                    if isinstance(v, bool) or not isinstance(v, (int, float)):
                        raise ParseError(path, lineno, f"bad {name}: {v!r}")
                    vals.append(float(v))
                x, y, w, h, score = vals
            records.append(_detection_record(path, lineno, frame, x, y, w, h, score))

    if not records:
        raise StructuralError(f"{path}: no frames")

    max_frame = max(r[0] for r in records)
    grouped: list[list[Detection]] = [[] for _ in range(max_frame + 1)]
    for frame, box, score in records:
        grouped[frame].append(Detection(frame=frame, box=box, score=score, id=len(grouped[frame])))
    return [FrameDetections(frame=i, detections=tuple(g)) for i, g in enumerate(grouped)]


def write_detections(frames: list[FrameDetections], path, fmt: str | None = None) -> None:
    """Write per-frame detections in the format read_detections accepts."""
    fmt = fmt or infer_format(path)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for fd in frames:
            for d in fd.detections:
                b = d.box
                if fmt == "csv":
                    f.write(
                        f"{d.frame},{_fmt(b.x)},{_fmt(b.y)},{_fmt(b.w)},{_fmt(b.h)},{_fmt(d.score)}\n"
                    )
                elif fmt == "jsonl":
                    f.write(
                        json.dumps(
                            {
                                "frame": d.frame,
                                "x": b.x,
                                "y": b.y,
                                "w": b.w,
                                "h": b.h,
                                "score": d.score,
                            }
                        )
                        + "\n"
                    )
                else:
                    raise ValueError(f"unknown detection format {fmt!r}")


# --- tracks and ground truth ----------------------------------------------


def _read_presence_rows(path, n_fields: int):
    rows = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            parts = _split_csv(line, path, lineno, n_fields)
            frame = _parse_int(parts[0], path, lineno, "frame")
            if frame < 0:
                raise ParseError(path, lineno, f"negative frame index {frame}")
            if frame in rows:
                raise ParseError(path, lineno, f"duplicate frame {frame}")
            present = parts[1]
            if present not in ("0", "1"):
                raise ParseError(path, lineno, f"present must be 0 or 1, got {present!r}")
            vals = [_parse_float(parts[i], path, lineno, f"field {i}") for i in range(2, n_fields)]
            if present == "1":
                try:
                    box = BoundingBox(vals[0], vals[1], vals[2], vals[3])
                except BoxError as e:
                    raise ParseError(path, lineno, str(e)) from None
            else:
                box = None
            rows[frame] = (box, vals[4] if n_fields == 7 else None, lineno)
    if not rows:
        raise StructuralError(f"{path}: no frames")
    for t in range(max(rows) + 1):
        if t not in rows:
            raise StructuralError(f"{path}: missing frame {t}; need one record per frame")
    return [rows[t] for t in range(max(rows) + 1)]


def read_track(path) -> TrackResult:
    """Read a track result file: frame, present, x, y, w, h, confidence."""
    entries = []
    for t, (box, conf, lineno) in enumerate(_read_presence_rows(path, 7)):
        if box is None and conf != 0.0:
            raise ParseError(path, lineno, f"absent frame carries confidence {conf}")
        entries.append(TrackEntry(frame=t, box=box, confidence=conf))
    return TrackResult(entries)


def write_track(track: TrackResult, path) -> None:
    """Write a track result; absent frames become t,0,0,0,0,0,0."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for e in track:
            if e.box is None:
                f.write(f"{e.frame},0,0,0,0,0,0\n")
            else:
                b = e.box
                f.write(
                    f"{e.frame},1,{_fmt(b.x)},{_fmt(b.y)},{_fmt(b.w)},{_fmt(b.h)},{_fmt(e.confidence)}\n"
                )


def read_ground_truth(path) -> TrackResult:
    """Read a ground-truth file: frame, present, x, y, w, h.

    Returned as a TrackResult with confidence 1 on present frames.
    """
    entries = []
    for t, (box, _, _) in enumerate(_read_presence_rows(path, 6)):
        entries.append(TrackEntry(frame=t, box=box, confidence=1.0 if box is not None else 0.0))
    return TrackResult(entries)


def write_ground_truth(gt: TrackResult, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for e in gt:
            if e.box is None:
                f.write(f"{e.frame},0,0,0,0,0\n")
            else:
                b = e.box
                f.write(f"{e.frame},1,{_fmt(b.x)},{_fmt(b.y)},{_fmt(b.w)},{_fmt(b.h)}\n")


# --- flat key = value configs ----------------------------------------------


def read_kv_file(path) -> dict[str, tuple[str, int]]:
    """Parse "key = value" lines into {key: (value, lineno)}.

    Blank lines and lines starting with '#' are skipped.  Duplicate keys
    are rejected.
    """
    out: dict[str, tuple[str, int]] = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ParseError(path, lineno, f"expected key = value, got {line!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if not key:
                raise ParseError(path, lineno, "empty key")
            if key in out:
                raise ParseError(path, lineno, f"duplicate key {key!r}")
            out[key] = (value, lineno)
    return out


def parse_bool(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "on", "yes"):
        return True
    if low in ("0", "false", "off", "no"):
        return False
    raise ValueError(f"bad boolean {text!r}")


def parse_param_value(key: str, text: str):
    """Parse one hyperparameter value from its config text."""
    if key == "boundary_length_weighting":
        return parse_bool(text)
    if key == "det_cap":
        return int(text)
    if key == "predecessor_horizon":
        return None if text.lower() == "none" else int(text)
    if key == "s_ff":
        return None if text.lower() == "none" else float(text)
    return float(text)


def load_config(path, base: Hyperparams | None = None) -> Hyperparams:
    """Load hyperparameters from a flat config file.

    Unknown keys, bad types, and out-of-range values all raise
    ConfigError.  Absent keys keep the values from `base` (engine
    defaults when base is None).

    Args:
        path: config file path.
        base: parameters to override; defaults when None.

    Returns:
        The merged Hyperparams.
    """
    known = set(hyperparams_fields())
    overrides = {}
    for key, (text, lineno) in read_kv_file(path).items():
        if key not in known:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            overrides[key] = parse_param_value(key, text)
        except ValueError as e:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {e}") from None
    try:
        return replace(base if base is not None else Hyperparams(), **overrides)
    except ValueError as e:
        raise ConfigError(f"{path}: {e}") from None


def write_config(params: Hyperparams, path) -> None:
    """Write hyperparameters in the flat format load_config reads."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for name in hyperparams_fields():
            v = getattr(params, name)
            if v is None:
                text = "none"
            elif isinstance(v, bool):
                text = "true" if v else "false"
            elif isinstance(v, int):
                text = str(v)
            else:
                text = _fmt(v)
            f.write(f"{name} = {text}\n")
