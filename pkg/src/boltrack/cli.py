"""Command line entry points: track, eval, gen, sweep.

Exit codes: 0 on success, 1 for validation problems (bad arguments,
malformed files, infeasible configs), 2 for I/O failures.  Diagnostics
go to stderr as "error: ..." lines; BOLTRACK_LOG sets log verbosity.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .geometry import BoundingBox
from .io import (
    infer_format,
    load_config,
    parse_param_value,
    read_detections,
    read_ground_truth,
    read_kv_file,
    read_track,
    write_config,
    write_detections,
    write_ground_truth,
    write_track,
)
from .metrics import EvalReport, evaluate, per_frame_iou, summarize
from .model import Hyperparams, hyperparams_fields, validate_sequence
from .rescore import run_no_rescoring, run_sequence
from .synth import ScenarioSpec, generate, load_scenario, lt_preset, write_scenario

log = logging.getLogger(__name__)

OBJECTIVES = {"j_box": "vos", "max_f": "lt", "success_auc": "otb"}


class _UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _parse_box(text: str) -> BoundingBox:
    parts = text.split(",")
    if len(parts) != 4:
        raise ValueError(f"expected x,y,w,h; got {text!r}")
    return BoundingBox(*(float(p) for p in parts))


def build_parser() -> _Parser:
    parser = _Parser(prog="boltrack", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("track", help="rescore a detection file into a track")
    p.add_argument("detections", help="detection file (csv or jsonl)")
    p.add_argument("--first-frame-box", required=True, metavar="X,Y,W,H",
                   help="reference box the track starts from")
    p.add_argument("-o", "--output", required=True, help="track output file")
    p.add_argument("--config", help="hyperparameter file; defaults when omitted")
    p.add_argument("--format", choices=["csv", "jsonl"],
                   help="detection format; inferred from the extension when omitted")
    p.add_argument("--no-rescoring", action="store_true",
                   help="emit the per-frame argmax-score detection instead")
    p.add_argument("--boundary-single-term", action="store_true",
                   help="count each chain boundary once instead of per frame "
                        "of the preceding tracklet")

    p = sub.add_parser("eval", help="score a track against ground truth")
    p.add_argument("track", help="track file from the track command")
    p.add_argument("groundtruth", help="ground-truth file")
    p.add_argument("--mode", choices=["vos", "lt", "otb"], default="vos")
    p.add_argument("-o", "--output-dir", required=True,
                   help="directory for report.json, curve CSVs, and figures")
    p.add_argument("--no-plots", action="store_true", help="skip figure rendering")

    p = sub.add_parser("gen", help="generate a synthetic scenario")
    grp = p.add_mutually_exclusive_group(required=True)
    grp.add_argument("--spec", help="scenario file in flat key = value form")
    grp.add_argument("--preset", choices=["lt"], help="built-in scenario preset")
    p.add_argument("-o", "--output-dir", required=True)
    p.add_argument("--seed", type=int, help="override the scenario seed")
    p.add_argument("--frames", type=int, help="override the sequence length")
    p.add_argument("--format", choices=["csv", "jsonl"], default="csv",
                   help="detection output format")

    p = sub.add_parser("sweep", help="grid-search hyperparameters on sequences")
    p.add_argument("sweepspec", help="flat file: objective, optional sequences, "
                                     "and comma-separated value lists per parameter")
    p.add_argument("datadir", help="directory of sequence subdirectories, each with "
                                   "detections.csv|jsonl and groundtruth.csv")
    p.add_argument("-o", "--output-dir", required=True)
    p.add_argument("--config", help="base hyperparameters the grid overrides")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    return parser


# --- track ------------------------------------------------------------------


def cmd_track(args) -> int:
    if args.config is not None:
        params = load_config(args.config)
    else:
        params = Hyperparams()
        log.warning("no config file given; using default hyperparameters")
    if args.boundary_single_term:
        params = replace(params, boundary_length_weighting=False)
    b_ff = _parse_box(args.first_frame_box)
    frames = read_detections(args.detections, args.format)
    seq = validate_sequence(frames, b_ff, params)
    if args.no_rescoring:
        track = run_no_rescoring(seq, params)
    else:
        track = run_sequence(seq, params)
    write_track(track, args.output)
    present = sum(1 for e in track if e.present)
    print(f"wrote {args.output}: {len(track)} frames, {present} present")
    return 0


# --- eval -------------------------------------------------------------------


def _write_lt_curve_csv(report: EvalReport, path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("threshold,precision,recall,f\n")
        for pt in report.lt_curve:
            f.write(f"{pt.threshold!r},{pt.precision!r},{pt.recall!r},{pt.f!r}\n")


def _write_grid_curve_csv(grid, values, names: tuple[str, str], path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"{names[0]},{names[1]}\n")
        for x, v in zip(grid, values):
            f.write(f"{x!r},{v!r}\n")


def write_report_files(
    report: EvalReport,
    out_dir: Path,
    ious: np.ndarray | None = None,
    gt_present: np.ndarray | None = None,
) -> None:
    """Emit report.json plus one CSV per curve the mode computed."""
    from .metrics import PRECISION_THRESHOLDS, SUCCESS_THRESHOLDS

    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(report.to_json(), encoding="utf-8")
    if ious is not None:
        with open(out_dir / "iou_per_frame.csv", "w", encoding="utf-8", newline="\n") as f:
            f.write("frame,gt_present,iou\n")
            for t, (v, g) in enumerate(zip(ious, gt_present)):
                f.write(f"{t},{int(g)},{float(v)!r}\n")
    if report.lt_curve is not None:
        _write_lt_curve_csv(report, out_dir / "lt_curve.csv")
    if report.success_curve is not None:
        _write_grid_curve_csv(
            SUCCESS_THRESHOLDS, report.success_curve,
            ("threshold", "success_rate"), out_dir / "success_curve.csv",
        )
        _write_grid_curve_csv(
            PRECISION_THRESHOLDS, report.precision_curve,
            ("pixel_threshold", "precision"), out_dir / "precision_curve.csv",
        )


def cmd_eval(args) -> int:
    pred = read_track(args.track)
    gt = read_ground_truth(args.groundtruth)
    report = evaluate(pred, gt, args.mode)
    out_dir = Path(args.output_dir)
    ious = gt_present = None
    if args.mode in ("vos", "lt"):
        ious = per_frame_iou(pred, gt)
        gt_present = np.array([g.box is not None for g in gt], dtype=bool)
    write_report_files(report, out_dir, ious, gt_present)
    if not args.no_plots:
        from .plots import render_report

        render_report(report, out_dir, ious, gt_present)
    fields = ("j_box", "max_f", "success_auc", "precision_at_20")
    parts = [f"{n}={getattr(report, n):.6f}" for n in fields if getattr(report, n) is not None]
    print(" ".join(parts))
    return 0


# --- gen ----------------------------------------------------------------------


def cmd_gen(args) -> int:
    if args.preset:
        # the preset derives its absence count from seed and length, so
        # overrides go in up front rather than through replace()
        seed = args.seed if args.seed is not None else 0
        if args.frames is not None:
            spec = lt_preset(seed, frames=args.frames)
        else:
            spec = lt_preset(seed)
    else:
        spec = load_scenario(args.spec)
        if args.seed is not None:
            spec = replace(spec, seed=args.seed)
        if args.frames is not None:
            spec = replace(spec, frames=args.frames)
    frames, gt = generate(spec)
    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    det_path = out_dir / ("detections.jsonl" if args.format == "jsonl" else "detections.csv")
    write_detections(frames, det_path)
    write_ground_truth(gt, out_dir / "groundtruth.csv")
    b = gt[0].box
    (out_dir / "firstframe.txt").write_text(
        f"{b.x!r},{b.y!r},{b.w!r},{b.h!r}\n", encoding="utf-8"
    )
    write_scenario(spec, out_dir / "scenario.cfg")
    n_det = sum(len(fd.detections) for fd in frames)
    n_absent = sum(1 for e in gt if not e.present)
    print(f"wrote {out_dir}: {spec.frames} frames, {n_det} detections, {n_absent} absent frames")
    return 0


# --- sweep --------------------------------------------------------------------


_WORKER_DATA = None


def _load_sweep_sequences(datadir: Path, names: list[str]):
    out = []
    for name in names:
        seq_dir = datadir / name
        det = seq_dir / "detections.csv"
        if not det.exists():
            det = seq_dir / "detections.jsonl"
        if not det.exists():
            raise ValueError(f"{seq_dir}: no detections.csv or detections.jsonl")
        gt = read_ground_truth(seq_dir / "groundtruth.csv")
        if gt[0].box is None:
            raise ValueError(f"{seq_dir}: ground truth absent at frame 0")
        frames = read_detections(det, infer_format(det))
        out.append((frames, gt))
    return out

def _sweep_worker_init(datadir: str, names: list[str]) -> None:
    global _WORKER_DATA
    _WORKER_DATA = _load_sweep_sequences(Path(datadir), names)


def _eval_grid_point(task) -> float:
    base, overrides, mode = task
    params = replace(base, **overrides)
    total = []
    for frames, gt in _WORKER_DATA:
        seq = validate_sequence(frames, gt[0].box, params)
        track = run_sequence(seq, params)
        report = evaluate(track, gt, mode)
        total.append(report)
    summary = summarize(total)
    return float(getattr(summary, {"vos": "j_box", "lt": "max_f", "otb": "success_auc"}[mode]))


def _sort_key_value(v):
    if v is None:
        return (1, 0.0)
    return (0, float(v))


def cmd_sweep(args) -> int:
    raw = read_kv_file(args.sweepspec)
    if "objective" not in raw:
        raise ValueError(f"{args.sweepspec}: missing objective")
    objective = raw.pop("objective")[0]
    if objective not in OBJECTIVES:
        raise ValueError(f"objective must be one of {sorted(OBJECTIVES)}, got {objective!r}")
    mode = OBJECTIVES[objective]

    datadir = Path(args.datadir)
    if "sequences" in raw:
        names = [n.strip() for n in raw.pop("sequences")[0].split(",") if n.strip()]
    else:
        names = sorted(
            d.name for d in datadir.iterdir()
            if d.is_dir() and (
                (d / "detections.csv").exists() or (d / "detections.jsonl").exists()
            )
        )
    if not names:
        raise ValueError(f"{datadir}: no sequences to sweep on")

    known = set(hyperparams_fields())
    grid_axes: list[tuple[str, list]] = []
    for key in sorted(raw):
        text, lineno = raw[key]
        if key not in known:
            raise ValueError(f"{args.sweepspec}:{lineno}: unknown parameter {key!r}")
        values = [parse_param_value(key, v.strip()) for v in text.split(",") if v.strip()]
        if not values:
            raise ValueError(f"{args.sweepspec}:{lineno}: empty value list for {key}")
        grid_axes.append((key, values))
    if not grid_axes:
        raise ValueError(f"{args.sweepspec}: no parameters to sweep")

    base = load_config(args.config) if args.config else Hyperparams()

    import itertools

    keys = [k for k, _ in grid_axes]
    points = [
        dict(zip(keys, combo))
        for combo in itertools.product(*(vals for _, vals in grid_axes))
    ]
    log.info("sweeping %d grid points on %d sequences", len(points), len(names))

    tasks = [(base, overrides, mode) for overrides in points]
    if args.jobs > 1:
        with ProcessPoolExecutor(
            max_workers=args.jobs,
            initializer=_sweep_worker_init,
            initargs=(str(datadir), names),
        ) as pool:
            scores = list(pool.map(_eval_grid_point, tasks))
    else:
        _sweep_worker_init(str(datadir), names)
        scores = [_eval_grid_point(t) for t in tasks]

    ranked = sorted(
        zip(scores, points),
        key=lambda sp: (-sp[0], tuple(_sort_key_value(sp[1][k]) for k in keys)),
    )

    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "leaderboard.csv", "w", encoding="utf-8", newline="\n") as f:
        f.write("rank," + objective + "," + ",".join(keys) + "\n")
        for rank, (score, overrides) in enumerate(ranked, start=1):
            vals = ",".join(_config_text(overrides[k]) for k in keys)
            f.write(f"{rank},{score!r},{vals}\n")
    best_score, best_overrides = ranked[0]
    write_config(replace(base, **best_overrides), out_dir / "best_config.cfg")
    best_txt = " ".join(f"{k}={_config_text(best_overrides[k])}" for k in keys)
    print(f"best {objective}={best_score!r} at {best_txt}")
    return 0


def _config_text(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    return repr(float(v))


# --- entry ----------------------------------------------------------------------


def main(argv=None) -> int:
    level = os.environ.get("BOLTRACK_LOG", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        handler = {
            "track": cmd_track,
            "eval": cmd_eval,
            "gen": cmd_gen,
            "sweep": cmd_sweep,
        }[args.command]
        return handler(args)
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
