"""Command-line pipeline: synth | rasterize | decode | beats | report |
evaluate | roc | losscheck.

Every subcommand takes --config/--seed/--out; outputs are deterministic
given the seed, usage errors exit 2, and data errors exit 1 with a
machine-readable error JSON on stderr. Verbosity comes from
ECHOBEAT_LOG={error,info,debug}.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import io
from .beats import BeatConfig, detect_beats
from .decode import DecodeConfig, decode_video
from .errors import EchobeatError, InvalidConfig
from .geometry import Calibration, Point2
from .labels import (
    JitterConfig,
    LossConfig,
    augmented_loss,
    finite_difference_grad,
    max_relative_error,
    rasterize,
    weighted_mse,
    weighted_mse_grad,
)
from .phantom import MockModelConfig, PhantomConfig, generate_trajectory, render_heatmaps
from .stats import BIAS, COD, MAE, PEARSON_SQ, R2, BootstrapConfig, bootstrap_ci, precision_recall, roc_auc
from .study import ANY, LvhRule, summarize

log = logging.getLogger("echobeat")


def _configure_logging() -> None:
    level = os.environ.get("ECHOBEAT_LOG", "error").lower()
    mapping = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(
        level=mapping.get(level, logging.ERROR),
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )


def _section(cfg: dict, name: str) -> dict:
    sec = cfg.get(name, {})
    if not isinstance(sec, dict):
        raise InvalidConfig(f"config section '{name}' must be a mapping")
    return sec


def _load_cfg(args) -> dict:
    return io.load_config(args.config) if args.config else {}


def _phantom_config(sec: dict, seed: int) -> PhantomConfig:
    kwargs = dict(sec)
    if "origin" in kwargs:
        ox, oy = kwargs["origin"]
        kwargs["origin"] = Point2(float(ox), float(oy))
    if "period_s" in kwargs and isinstance(kwargs["period_s"], list):
        kwargs["period_s"] = tuple(kwargs["period_s"])
    kwargs["seed"] = seed
    return PhantomConfig(**kwargs)


def _calibration(args) -> Calibration:
    if getattr(args, "pixel_units", False):
        return Calibration.pixel_units(fps=args.fps)
    if not args.calibration:
        raise InvalidConfig(
            "decode needs --calibration FILE or the explicit --pixel-units flag"
        )
    doc = io.load_config(args.calibration)
    return Calibration(cm_per_pixel=doc["cm_per_pixel"], fps=doc["fps"])


# --- subcommands -------------------------------------------------------------


def cmd_synth(args) -> int:
    cfg = _load_cfg(args)
    phantom_cfg = _phantom_config(_section(cfg, "phantom"), args.seed)
    mock_cfg = MockModelConfig(**{**_section(cfg, "mock_model"), "seed": args.seed + 1})
    extent = _section(cfg, "extent")
    height, width = int(extent.get("height", 180)), int(extent.get("width", 96))
    video_id = cfg.get("video_id", "phantom")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    traj = generate_trajectory(phantom_cfg)
    stack = render_heatmaps(traj, mock_cfg, height, width)
    io.write_tensor(out / "heatmaps.eht", stack)
    log.info("rendered %d frames at %dx%d", traj.n_frames, height, width)

    cal = Calibration(cm_per_pixel=phantom_cfg.cm_per_pixel, fps=phantom_cfg.fps)
    phase_of = {}
    phase_of.update({f: "diastole" for f in traj.diastole_frames})
    phase_of.update({f: "systole" for f in traj.systole_frames})
    ann = io.annotation_doc(
        video_id,
        cal,
        (
            (f, phase_of.get(f), traj.points_for_frame(f))
            for f in range(traj.n_frames)
        ),
    )
    io.write_json(out / "annotations.json", ann)

    rows = [
        (
            f,
            repr(float(traj.measurements[f, 0])),
            repr(float(traj.measurements[f, 1])),
            repr(float(traj.measurements[f, 2])),
            phase_of.get(f, ""),
        )
        for f in range(traj.n_frames)
    ]
    io.write_csv(out / "truth_frames.csv", ("id", "ivs_cm", "lvid_cm", "lvpw_cm", "phase"), rows)

    io.write_json(
        out / "truth_study.json",
        {
            "schema_version": io.SCHEMA_VERSION,
            "video_id": video_id,
            "fps": phantom_cfg.fps,
            "cm_per_pixel": phantom_cfg.cm_per_pixel,
            "n_frames": traj.n_frames,
            "lvid_d_cm": phantom_cfg.lvid_d,
            "lvid_s_cm": phantom_cfg.lvid_s,
            "ivs_d_cm": phantom_cfg.ivs_d,
            "lvpw_d_cm": phantom_cfg.lvpw_d,
            "diastole_frames": list(traj.diastole_frames),
            "systole_frames": list(traj.systole_frames),
        },
    )
    return 0


def cmd_rasterize(args) -> int:
    cfg = _load_cfg(args)
    sec = _section(cfg, "rasterize")
    doc = io.read_json(args.annotations)
    height = int(args.height or sec.get("height") or 0)
    width = int(args.width or sec.get("width") or 0)
    if height < 1 or width < 1:
        raise InvalidConfig("rasterize needs --height/--width (or config values)")
    sigma = args.sigma if args.sigma is not None else float(sec.get("sigma", 2.0))

    frames = sorted(doc["frames"], key=lambda f: f["frame_index"])
    labels = np.zeros((len(frames), 4, height, width), dtype=np.float32)
    indices = []
    for i, frame in enumerate(frames):
        points = io.annotation_points(frame)
        jitter = JitterConfig(sigma=sigma, seed=args.seed + frame["frame_index"])
        labels[i] = rasterize(points, height, width, jitter)
        indices.append(frame["frame_index"])

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    io.write_tensor(out, labels)
    io.write_json(
        out.with_name(out.stem + "_index.json"),
        {
            "schema_version": io.SCHEMA_VERSION,
            "frame_indices": indices,
            "height": height,
            "width": width,
            "sigma": sigma,
            "seed": args.seed,
        },
    )
    return 0


def _decode_one(path: Path, out_path: Path, cfg: DecodeConfig, cal: Calibration) -> None:
    stack = io.read_tensor(path)
    outcomes = decode_video(stack, cfg, cal)
    io.write_frames_jsonl(out_path, outcomes, cal, video_id=path.stem)
    log.info("decoded %s: %d frames", path.name, len(outcomes))


def cmd_decode(args) -> int:
    cfg = _load_cfg(args)
    decode_cfg = DecodeConfig(**_section(cfg, "decode"))
    cal = _calibration(args)
    inputs = [Path(p) for p in args.heatmaps]
    if len(inputs) == 1:
        _decode_one(inputs[0], Path(args.out), decode_cfg, cal)
        return 0
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    jobs = max(1, args.jobs)
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        futures = [
            pool.submit(
                _decode_one, p, out_dir / f"{p.stem}.frames.jsonl", decode_cfg, cal
            )
            for p in inputs
        ]
        for f in futures:
            f.result()
    return 0


def cmd_beats(args) -> int:
    cfg = _load_cfg(args)
    beat_cfg = BeatConfig(**_section(cfg, "beats"))
    meta, records = io.read_frames_jsonl(args.frames)
    series = io.series_from_frame_records(records, fps=meta["fps"])
    found = detect_beats(series, beat_cfg)
    io.write_json(
        args.out, io.beats_doc(found, fps=meta["fps"], video_id=meta.get("video_id"))
    )
    log.info("detected %d beats", len(found))
    return 0


def cmd_report(args) -> int:
    cfg = _load_cfg(args)
    sec = _section(cfg, "report")
    rule_sec = _section(cfg, "lvh_rule")
    rule = None
    if rule_sec:
        rule = LvhRule(
            ivs_threshold_cm=rule_sec["ivs_threshold_cm"],
            lvpw_threshold_cm=rule_sec["lvpw_threshold_cm"],
            combinator=rule_sec.get("combinator", ANY),
        )
    doc = io.read_json(args.beats)
    beats = [io.beat_from_obj(b) for b in doc["beats"]]
    summary = summarize(
        beats,
        rule=rule,
        center=sec.get("center", "mean"),
        config_echo={"fps": doc["fps"], "seed": args.seed},
    )
    io.write_json(args.out, io.study_report_doc(summary, video_id=doc.get("video_id")))
    return 0


def cmd_evaluate(args) -> int:
    sample = io.read_paired_csv(args.pred, args.ref)
    boot = BootstrapConfig(n_resamples=args.bootstrap, level=args.level, seed=args.seed)
    statistic = {"mae": MAE, "r2": R2, "bias": BIAS}[args.statistic]
    r2_mode = PEARSON_SQ if args.r2_mode == "pearson_sq" else COD
    result = bootstrap_ci(sample, statistic, boot, r2_mode=r2_mode)
    report = {
        "schema_version": io.SCHEMA_VERSION,
        "statistic": args.statistic,
        "point": result["point"],
        "ci_lo": result["lo"],
        "ci_hi": result["hi"],
        "n": sample.n,
        "n_skipped": result["n_skipped"],
        "config": {
            "n_resamples": boot.n_resamples,
            "level": boot.level,
            "seed": boot.seed,
            "r2_mode": args.r2_mode,
        },
    }
    io.write_json(args.out, report)
    return 0


def cmd_roc(args) -> int:
    data = io.read_scored_csv(args.scores)
    auc, roc_curve = roc_auc(data)
    ap, pr_curve = precision_recall(data)
    report = {
        "schema_version": io.SCHEMA_VERSION,
        "auc": auc,
        "roc_curve": [
            {
                "fpr": fpr,
                "tpr": tpr,
                "threshold": "inf" if math.isinf(thr) else thr,
            }
            for fpr, tpr, thr in roc_curve
        ],
        "average_precision": ap,
        "pr_curve": [
            {"recall": r, "precision": p, "threshold": thr}
            for r, p, thr in pr_curve
        ],
        "n": int(data.scores.size),
        "n_pos": data.n_pos,
        "n_neg": data.n_neg,
    }
    io.write_json(args.out, report)
    return 0


def _random_losscheck_pair(seed: int, shape) -> tuple:
    rng = np.random.default_rng(seed)
    pred = rng.random(shape, dtype=np.float64)
    label = np.zeros(shape, dtype=np.float64)
    for c in range(shape[0]):
        iy = int(rng.integers(0, shape[1]))
        ix = int(rng.integers(0, shape[2]))
        label[c, iy, ix] = 1.0
    return pred, label


def cmd_losscheck(args) -> int:
    if (args.pred is None) != (args.labels is None):
        raise InvalidConfig("losscheck needs both --pred and --labels, or neither")
    if args.pred is not None:
        pred = io.read_tensor(args.pred).astype(np.float64)
        label = io.read_tensor(args.labels).astype(np.float64)
    else:
        shape = tuple(args.shape)
        if len(shape) != 3 or shape[0] != 4:
            raise InvalidConfig("--shape must be 4 H W", shape=list(shape))
        pred, label = _random_losscheck_pair(args.seed, shape)

    loss = weighted_mse(pred, label, args.alpha)
    report = {
        "schema_version": io.SCHEMA_VERSION,
        "loss": loss,
        "alpha": args.alpha,
        "lambda_aux": args.lambda_aux,
        "shape": list(pred.shape),
        "grad_check": None,
    }
    if args.lambda_aux > 0 and pred.ndim == 3 and pred.shape[0] == 4:
        points = _points_from_one_hot(label)
        if points is not None:
            report["augmented_loss"] = augmented_loss(
                pred,
                label,
                points,
                Calibration.pixel_units(fps=1.0),
                LossConfig(alpha=args.alpha, lambda_aux=args.lambda_aux),
            )
    ok = True
    if args.grad_check:
        analytic = weighted_mse_grad(pred, label, args.alpha)
        fd = finite_difference_grad(pred, label, args.alpha)
        err = max_relative_error(analytic, fd)
        ok = err < args.tolerance
        report["grad_check"] = {
            "max_rel_error": err,
            "tolerance": args.tolerance,
            "passed": ok,
        }
        sys.stdout.write(
            f"grad_check max_rel_error={err:.3e} tolerance={args.tolerance:.1e} "
            f"{'PASS' if ok else 'FAIL'}\n"
        )
    if args.out:
        io.write_json(args.out, report)
    else:
        sys.stdout.write(io.dumps_json(report))
    if not ok:
        raise EchobeatError(
            "gradient check failed",
            max_rel_error=report["grad_check"]["max_rel_error"],
            tolerance=args.tolerance,
        )
    return 0


def _points_from_one_hot(label: np.ndarray):
    from .geometry import _CHANNEL_ORDER

    points = {}
    for k, ch in enumerate(_CHANNEL_ORDER):
        plane = label[k]
        hot = np.argwhere(plane == 1.0)
        if hot.shape[0] != 1 or plane.sum() != 1.0:
            return None
        iy, ix = hot[0]
        points[ch] = Point2(float(ix), float(iy))
    return points


# --- parser ------------------------------------------------------------------


def _add_common(sp) -> None:
    sp.add_argument("--config", help="structured config file (YAML or JSON)")
    sp.add_argument("--seed", type=int, default=0, help="master seed (default 0)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="echobeat",
        description="PLAX wall-measurement pipeline: phantom synthesis, label "
        "rasterization, heatmap decoding, beat detection, study reports, and "
        "evaluation statistics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("synth", help="generate a synthetic study with known truth")
    _add_common(sp)
    sp.add_argument("--out", required=True, help="output directory")
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("rasterize", help="rasterize annotations into label tensors")
    _add_common(sp)
    sp.add_argument("--annotations", required=True, help="annotation JSON")
    sp.add_argument("--height", type=int, help="label image height")
    sp.add_argument("--width", type=int, help="label image width")
    sp.add_argument("--sigma", type=float, help="jitter sd in pixels (default 2.0)")
    sp.add_argument("--out", required=True, help="output tensor file")
    sp.set_defaults(func=cmd_rasterize)

    sp = sub.add_parser("decode", help="decode heatmap tensors into frame records")
    _add_common(sp)
    sp.add_argument("--heatmaps", required=True, nargs="+", help="input tensor file(s)")
    sp.add_argument("--calibration", help="JSON/YAML file with cm_per_pixel and fps")
    sp.add_argument(
        "--pixel-units",
        action="store_true",
        help="report lengths in pixels (explicit cm_per_pixel=1)",
    )
    sp.add_argument("--fps", type=float, default=1.0, help="fps for --pixel-units")
    sp.add_argument("--jobs", type=int, default=1, help="parallel studies when multiple inputs")
    sp.add_argument("--out", required=True, help="output JSONL (file, or dir for multiple inputs)")
    sp.set_defaults(func=cmd_decode)

    sp = sub.add_parser("beats", help="extract cardiac cycles from frame records")
    _add_common(sp)
    sp.add_argument("--frames", required=True, help="per-frame JSONL from decode")
    sp.add_argument("--out", required=True, help="output beats JSON")
    sp.set_defaults(func=cmd_beats)

    sp = sub.add_parser("report", help="aggregate beats into a study report")
    _add_common(sp)
    sp.add_argument("--beats", required=True, help="beats JSON")
    sp.add_argument("--out", required=True, help="output study report JSON")
    sp.set_defaults(func=cmd_report)

    sp = sub.add_parser("evaluate", help="agreement statistic with bootstrap CI")
    _add_common(sp)
    sp.add_argument("--pred", required=True, help="CSV with columns id,pred")
    sp.add_argument("--ref", required=True, help="CSV with columns id,ref")
    sp.add_argument("--statistic", required=True, choices=("mae", "r2", "bias"))
    sp.add_argument("--bootstrap", type=int, default=10_000, help="resample count")
    sp.add_argument("--level", type=float, default=0.95, help="CI level")
    sp.add_argument(
        "--r2-mode", choices=("pearson_sq", "cod"), default="pearson_sq"
    )
    sp.add_argument("--out", required=True, help="output eval report JSON")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("roc", help="ROC/AUC and precision-recall for scores")
    _add_common(sp)
    sp.add_argument("--scores", required=True, help="CSV with columns id,score,label")
    sp.add_argument("--out", required=True, help="output ROC report JSON")
    sp.set_defaults(func=cmd_roc)

    sp = sub.add_parser("losscheck", help="evaluate the loss and verify its gradient")
    _add_common(sp)
    sp.add_argument("--pred", help="prediction tensor file")
    sp.add_argument("--labels", help="label tensor file")
    sp.add_argument("--alpha", type=float, default=0.001)
    sp.add_argument("--lambda-aux", type=float, default=0.001)
    sp.add_argument("--grad-check", action="store_true", help="finite-difference check")
    sp.add_argument("--tolerance", type=float, default=1e-5)
    sp.add_argument(
        "--shape",
        type=int,
        nargs=3,
        default=(4, 16, 16),
        metavar=("C", "H", "W"),
        help="random-instance shape when no tensors are given",
    )
    sp.add_argument("--out", help="output report JSON (stdout when omitted)")
    sp.set_defaults(func=cmd_losscheck)

    return parser


def main(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except EchobeatError as err:
        sys.stderr.write(json.dumps(err.to_json_obj(), sort_keys=True) + "\n")
        return 1
    except OSError as err:
        obj = {"code": "io_error", "message": str(err), "context": {}}
        sys.stderr.write(json.dumps(obj, sort_keys=True) + "\n")
        return 1
    except (ValueError, KeyError, TypeError) as err:
        obj = {
            "code": "data_error",
            "message": f"{type(err).__name__}: {err}",
            "context": {},
        }
        sys.stderr.write(json.dumps(obj, sort_keys=True) + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
