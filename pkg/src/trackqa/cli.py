"""Command-line front-end: align / qa / correct / extrapolate / synth / report.

Exit codes: 0 success, 1 unreadable input, 2 parse or config error,
3 alignment failure mid-sequence (partial output still written).
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import __version__
from . import annotate as an
from . import homography as hg
from . import synth as sy
from .align import AlignConfig, AlignmentResult, align_sequence, to_canonical
from .annotate import read_annotations, write_annotations
from .ecc import EccConfig, WarpModel
from .features import FeatureConfig
from .imageio import load_sequence, write_pgm
from .smooth import SmootherSpec, TooFewPointsError, smooth_canonical

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_PARSE = 2
EXIT_ALIGN_FAILED = 3

SMOOTHER_ALIASES = {"movmean": "movmean", "gaussian": "gaussian", "sg": "savitzky_golay", "lowess": "lowess"}


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def build_manifest(args, timings: dict | None = None) -> dict:
    m = {
        "tool": "trackqa",
        "version": __version__,
        "command": args.command,
        "args": {k: v for k, v in sorted(vars(args).items()) if k not in ("func",)},
        "timings": timings or {},
    }
    if not getattr(args, "deterministic", False):
        m["timestamp"] = time.strftime("%Y-%m-%dT%H:%M:%S")
    else:
        m["timings"] = {}
    return m


def write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def write_csv(path: Path, header: str, rows, manifest_ref: str) -> None:
    lines = [f"# manifest: {manifest_ref}", header]
    lines += [",".join(f"{v:.6f}" if isinstance(v, float) else str(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


def smoother_from_args(args) -> SmootherSpec:
    try:
        return SmootherSpec(
            method=SMOOTHER_ALIASES[args.smoother],
            window=args.window,
            sigma=args.sigma,
            poly_order=args.order,
            fraction=args.fraction,
        )
    except (KeyError, ValueError) as e:
        raise CliError(f"bad smoother settings: {e}", EXIT_PARSE)


def align_config_from_args(args) -> AlignConfig:
    return AlignConfig(
        keypoint_threshold=args.keypoint_threshold,
        feature=FeatureConfig(seed=args.seed),
        ransac=hg.RansacConfig(seed=args.seed),
        ecc=EccConfig(model=WarpModel(args.ecc_model)),
    )


def _load_inputs(args):
    try:
        frames = load_sequence(args.frames)
    except (FileNotFoundError, NotADirectoryError, OSError) as e:
        raise CliError(f"cannot read frames: {e}", EXIT_INPUT)
    except ValueError as e:
        raise CliError(f"cannot decode frames: {e}", EXIT_PARSE)
    if len(frames) < 2:
        raise CliError("need at least 2 frames", EXIT_INPUT)
    try:
        traj = read_annotations(args.annotations, getattr(args, "absence", None))
    except OSError as e:
        raise CliError(f"cannot read annotations: {e}", EXIT_INPUT)
    except ValueError as e:
        raise CliError(f"cannot parse annotations: {e}", EXIT_PARSE)
    if len(traj) != len(frames):
        raise CliError(
            f"annotation count ({len(traj)}) differs from frame count ({len(frames)})", EXIT_PARSE
        )
    return frames, traj


def _load_alignment(path) -> AlignmentResult:
    try:
        return AlignmentResult.from_dict(json.loads(Path(path).read_text())["alignment"])
    except OSError as e:
        raise CliError(f"cannot read alignment: {e}", EXIT_INPUT)
    except (KeyError, ValueError) as e:
        raise CliError(f"cannot parse alignment: {e}", EXIT_PARSE)


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_align(args) -> int:
    frames, traj = _load_inputs(args)
    out = _outdir(args)
    t0 = time.perf_counter()
    result = align_sequence(frames, traj, align_config_from_args(args))
    canon = to_canonical(result, traj)
    timings = {"align_s": round(time.perf_counter() - t0, 3)}
    payload = {
        "manifest": build_manifest(args, timings),
        "alignment": result.to_dict(),
    }
    write_json(out / "alignment.json", payload)
    rows = [
        (i, *(p if p is not None else ("", ""))) for i, p in enumerate(canon.points)
    ]
    write_csv(out / "canonical.csv", "frame,x,y", rows, "alignment.json")
    if result.failed_at is not None:
        print(f"alignment failed at frame {result.failed_at}; partial output written", file=sys.stderr)
        return EXIT_ALIGN_FAILED
    return EXIT_OK


def _smoothed_centers(alignment, traj, spec):
    try:
        canon = to_canonical(alignment, traj)
        smoothed = smooth_canonical(canon, spec)
    except (TooFewPointsError, an.LengthMismatchError) as e:
        raise CliError(str(e), EXIT_PARSE)
    centers = an.reproject(smoothed, alignment)
    return canon, smoothed, centers


def _parse_grid(text: str) -> list[float]:
    try:
        grid = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise CliError(f"bad tau grid: {e}", EXIT_PARSE)
    if not grid or any(t <= 0 for t in grid):
        raise CliError("tau grid must be positive", EXIT_PARSE)
    return grid


def cmd_qa(args) -> int:
    if args.tau <= 0:
        raise CliError("--tau must be positive", EXIT_PARSE)
    alignment = _load_alignment(args.alignment)
    try:
        traj = read_annotations(args.annotations, getattr(args, "absence", None))
    except OSError as e:
        raise CliError(f"cannot read annotations: {e}", EXIT_INPUT)
    except ValueError as e:
        raise CliError(f"cannot parse annotations: {e}", EXIT_PARSE)
    spec = smoother_from_args(args)
    grid = _parse_grid(args.tau_grid)
    out = _outdir(args)

    canon, smoothed, centers = _smoothed_centers(alignment, traj, spec)
    d = an.distances(traj, centers)
    report = an.flag_outliers(d, args.tau)
    curve = an.success_rate_curve(d, grid)

    payload = {
        "manifest": build_manifest(args),
        "threshold": report.threshold,
        "evaluated": report.evaluated,
        "outliers": report.outliers,
        "distances": [None if v is None else round(v, 4) for v in report.distances],
        "flagged": report.flagged,
        "smoother": {
            "method": spec.method, "window": spec.window, "sigma": spec.sigma,
            "poly_order": spec.poly_order, "fraction": spec.fraction,
        },
    }
    write_json(out / "outlier_report.json", payload)
    write_csv(out / "success_curve.csv", "threshold,rate", curve, "outlier_report.json")
    svg = trajectory_svg(traj, smoothed, alignment)
    (out / "trajectory.svg").write_text(svg)
    return EXIT_OK


def cmd_correct(args) -> int:
    if args.tau <= 0:
        raise CliError("--tau must be positive", EXIT_PARSE)
    alignment = _load_alignment(args.alignment)
    try:
        traj = read_annotations(args.annotations, getattr(args, "absence", None))
    except (OSError, ValueError) as e:
        raise CliError(f"annotations: {e}", EXIT_INPUT if isinstance(e, OSError) else EXIT_PARSE)
    spec = smoother_from_args(args)
    out = _outdir(args)

    _, _, centers = _smoothed_centers(alignment, traj, spec)
    result = an.correct(traj, centers, args.tau)
    write_annotations(result.corrected, out / "corrected.txt")
    payload = {
        "manifest": build_manifest(args),
        "threshold": args.tau,
        "replaced_mask": result.replaced_mask,
        "replaced_fraction": round(result.replaced_fraction, 6),
    }
    if args.tau_grid:
        grid = _parse_grid(args.tau_grid)
        stats = an.replaced_stats(traj, centers, grid)
        payload["replaced_stats"] = [
            {"threshold": t, "replaced_fraction": round(f, 6)} for t, f in stats
        ]
        write_csv(out / "replaced_stats.csv", "threshold,replaced_fraction", stats, "correction.json")
    write_json(out / "correction.json", payload)
    return EXIT_OK


def cmd_extrapolate(args) -> int:
    alignment = _load_alignment(args.alignment)
    try:
        traj = read_annotations(args.annotations, getattr(args, "absence", None))
    except (OSError, ValueError) as e:
        raise CliError(f"annotations: {e}", EXIT_INPUT if isinstance(e, OSError) else EXIT_PARSE)
    spec = smoother_from_args(args)
    out = _outdir(args)
    try:
        filled = an.extrapolate_missing(traj, alignment, spec)
    except (TooFewPointsError, an.LengthMismatchError) as e:
        raise CliError(str(e), EXIT_PARSE)
    write_annotations(filled, out / "filled.txt")
    n_filled = sum(
        1 for a, b in zip(traj.boxes, filled.boxes) if a is None and b is not None
    )
    write_json(out / "extrapolation.json", {
        "manifest": build_manifest(args),
        "filled_frames": n_filled,
    })
    return EXIT_OK


def cmd_synth(args) -> int:
    try:
        raw = json.loads(Path(args.config).read_text())
    except OSError as e:
        raise CliError(f"cannot read config: {e}", EXIT_INPUT)
    except ValueError as e:
        raise CliError(f"cannot parse config: {e}", EXIT_PARSE)
    try:
        cfg = scenario_config_from_dict(raw)
        scenario = sy.generate(cfg)
    except (TypeError, ValueError) as e:
        raise CliError(f"bad scenario config: {e}", EXIT_PARSE)
    out = _outdir(args)
    frames_dir = out / "frames"
    frames_dir.mkdir(exist_ok=True)
    digits = len(str(cfg.frames))
    for i, img in enumerate(scenario.frames):
        write_pgm(img, frames_dir / f"frame{i:0{digits}d}.pgm")
    write_annotations(scenario.noisy, out / "annotations.txt")
    write_json(out / "groundtruth.json", {
        "manifest": build_manifest(args),
        "config": raw,
        "true_camera": [h.to_flat() for h in scenario.true_camera],
        "true_centers": [[round(x, 6), round(y, 6)] for x, y in scenario.true_centers],
        "true_boxes": [[b.x, b.y, b.w, b.h] for b in scenario.true_boxes],
        "injected_outliers": scenario.injected_outliers,
    })
    return EXIT_OK


def scenario_config_from_dict(raw: dict) -> sy.ScenarioConfig:
    d = dict(raw)
    if "object_path" in d:
        p = dict(d["object_path"])
        if "knots" in p:
            p["knots"] = tuple(tuple(k) for k in p["knots"])
        if "start" in p:
            p["start"] = tuple(p["start"])
        if "velocity" in p:
            p["velocity"] = tuple(p["velocity"])
        d["object_path"] = sy.ObjectPath(**p)
    if "blur_frames" in d:
        d["blur_frames"] = {int(k): float(v) for k, v in d["blur_frames"].items()}
    if "object_size" in d:
        d["object_size"] = tuple(d["object_size"])
    if "outlier_range" in d:
        d["outlier_range"] = tuple(d["outlier_range"])
    return sy.ScenarioConfig(**d)


def cmd_report(args) -> int:
    out = _outdir(args)
    curves = []
    stats = []
    for path in args.inputs:
        p = Path(path)
        if not p.exists():
            raise CliError(f"missing input {p}", EXIT_INPUT)
        try:
            doc = json.loads(p.read_text())
        except ValueError as e:
            raise CliError(f"cannot parse {p}: {e}", EXIT_PARSE)
        if "replaced_stats" in doc:
            stats.append(doc["replaced_stats"])
        if "distances" in doc:
            d = [v for v in doc["distances"] if v is not None]
            curves.append(d)

    payload: dict = {"manifest": build_manifest(args), "sequences": len(args.inputs)}
    if stats:
        taus = [row["threshold"] for row in stats[0]]
        mean_fracs = [
            sum(s[i]["replaced_fraction"] for s in stats) / len(stats) for i in range(len(taus))
        ]
        payload["replaced_grid"] = [
            {"threshold": t, "mean_replaced_fraction": round(f, 6)} for t, f in zip(taus, mean_fracs)
        ]
        write_csv(out / "replaced_grid.csv", "threshold,mean_replaced_fraction",
                  list(zip(taus, mean_fracs)), "summary.json")
    if curves:
        grid = _parse_grid(args.tau_grid)
        rates = []
        for t in grid:
            per_seq = [sum(v < t for v in d) / len(d) for d in curves if d]
            rates.append((t, sum(per_seq) / len(per_seq)))
        payload["mean_success_curve"] = [
            {"threshold": t, "rate": round(r, 6)} for t, r in rates
        ]
        write_csv(out / "mean_success_curve.csv", "threshold,rate", rates, "summary.json")
    write_json(out / "summary.json", payload)
    return EXIT_OK


def trajectory_svg(traj, smoothed, alignment, width=640, height=480) -> str:
    """Overlay of the raw annotation centers and the reprojected smoothed
    trajectory, in original image coordinates."""
    raw_pts = [b.center for b in traj.boxes if b is not None]
    rep = an.reproject(smoothed, alignment)
    smooth_pts = [p for p in rep if p is not None]
    pts = raw_pts + smooth_pts
    if not pts:
        return "<svg xmlns='http://www.w3.org/2000/svg'/>"
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    sx = (width - 40) / max(x1 - x0, 1e-9)
    sy = (height - 40) / max(y1 - y0, 1e-9)
    s = min(sx, sy)

    def path(points):
        return " ".join(
            f"{'M' if i == 0 else 'L'}{20 + (p[0] - x0) * s:.2f},{20 + (p[1] - y0) * s:.2f}"
            for i, p in enumerate(points)
        )

    return (
        f"<svg xmlns='http://www.w3.org/2000/svg' width='{width}' height='{height}'>\n"
        "<!-- raw vs smoothed trajectory overlay -->\n"
        f"<path d='{path(raw_pts)}' fill='none' stroke='#00bcd4' stroke-width='1'/>\n"
        f"<path d='{path(smooth_pts)}' fill='none' stroke='#1a237e' stroke-width='1.5'/>\n"
        "</svg>\n"
    )


def _add_smoother_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--smoother", default="sg", choices=sorted(SMOOTHER_ALIASES))
    p.add_argument("--window", type=int, default=11)
    p.add_argument("--sigma", type=float, default=2.0)
    p.add_argument("--order", type=int, default=2)
    p.add_argument("--fraction", type=float, default=0.1)


def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--deterministic", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="trackqa")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("align", help="register a sequence to its first frame")
    p.add_argument("--frames", required=True)
    p.add_argument("--annotations", required=True)
    p.add_argument("--absence", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--keypoint-threshold", type=int, default=20, dest="keypoint_threshold")
    p.add_argument("--ecc-model", default="translation",
                   choices=["translation", "affine", "homography"], dest="ecc_model")
    _add_common_flags(p)
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("qa", help="flag annotation outliers and emit the success curve")
    p.add_argument("--alignment", required=True)
    p.add_argument("--annotations", required=True)
    p.add_argument("--absence", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--tau", type=float, default=100.0)
    p.add_argument("--tau-grid", default="5,10,20,30,50,100", dest="tau_grid")
    _add_smoother_flags(p)
    _add_common_flags(p)
    p.set_defaults(func=cmd_qa)

    p = sub.add_parser("correct", help="re-center outlier boxes at the smoothed trajectory")
    p.add_argument("--alignment", required=True)
    p.add_argument("--annotations", required=True)
    p.add_argument("--absence", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--tau", type=float, default=100.0)
    p.add_argument("--tau-grid", default="", dest="tau_grid")
    _add_smoother_flags(p)
    _add_common_flags(p)
    p.set_defaults(func=cmd_correct)

    p = sub.add_parser("extrapolate", help="fill missing annotation frames")
    p.add_argument("--alignment", required=True)
    p.add_argument("--annotations", required=True)
    p.add_argument("--absence", default=None)
    p.add_argument("--out", required=True)
    _add_smoother_flags(p)
    _add_common_flags(p)
    p.set_defaults(func=cmd_extrapolate)

    p = sub.add_parser("synth", help="materialize a synthetic scenario to disk")
    p.add_argument("config")
    p.add_argument("--out", required=True)
    _add_common_flags(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("report", help="aggregate per-sequence reports")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--out", required=True)
    p.add_argument("--tau-grid", default="5,10,20,30,50,100", dest="tau_grid")
    _add_common_flags(p)
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.code


if __name__ == "__main__":
    sys.exit(main())
