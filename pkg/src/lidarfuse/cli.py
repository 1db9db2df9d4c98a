"""Command-line entry point: ``lidarfuse <command> [options]``.

Exit codes: 0 success, 2 config or parse error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import config as config_mod
from . import formats
from .evaluation import evaluation_report
from .experiments import SWEEP_HEADER, alpha_sweep, plane_sweep, propagation_example, sweep_rows
from .fusion import SensorRig, default_grid_geometry, feature_fuse, input_fuse, result_fuse, voxelize_mean, FusionError
from .scene import SceneError, generate_scene

log = logging.getLogger("lidarfuse")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_CONFIG):
        super().__init__(message)
        self.code = code


def _alphas(text: str) -> tuple:
    try:
        vals = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad alpha list {text!r}") from None
    if any(v < 0 or not np.isfinite(v) for v in vals):
        raise argparse.ArgumentTypeError("alphas must be finite and non-negative")
    return vals


def _load_config(args) -> config_mod.RigConfig:
    cfg = config_mod.load(args.config) if args.config else config_mod.RigConfig()
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def _out_dir(args) -> Path:
    return formats.ensure_dir(args.out or ".")


MATRIX_HEADER = ("alpha", "kind", "m00", "m01", "m02", "m10", "m11", "m12", "m20", "m21", "m22",
                 "std_x", "std_y", "std_z")


def cmd_propagate_example(args) -> int:
    cfg = _load_config(args)
    if args.alpha is not None:
        cfg = replace(cfg, propagate=replace(cfg.propagate, alphas=args.alpha))
    rows = [
        (r["alpha"], r["kind"], *r["matrix"].reshape(-1), *r["std"])
        for r in propagation_example(cfg)
    ]
    _emit(args, "propagate.csv", MATRIX_HEADER, rows)
    return EXIT_OK


PLANE_HEADER = ("alpha", "err_weighted", "err_unweighted", "trials", "failures")


def cmd_plane_sweep(args) -> int:
    cfg = _load_config(args)
    if args.alpha is not None:
        cfg = replace(cfg, plane=replace(cfg.plane, alphas=args.alpha))
    reports = plane_sweep(cfg)
    rows = [(r.alpha, r.error_weighted, r.error_unweighted, r.trials, r.failures) for r in reports]
    _emit(args, "plane_sweep.csv", PLANE_HEADER, rows)
    total = sum(r.failures for r in reports)
    if total:
        log.warning("%d plane fits failed", total)
    if all(r.failures == r.trials for r in reports):
        raise CliError("every plane fit failed", EXIT_NUMERIC)
    return EXIT_OK


def cmd_gen_scene(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args)
    try:
        scene = generate_scene(cfg.scene, cfg.extrinsics(), cfg.seed)
    except SceneError as exc:
        raise CliError(str(exc)) from None
    for s, cloud in zip(cfg.sensors, scene.sensor_clouds):
        formats.write_cloud(out / f"{s.name}.bin", cloud)
    formats.write_boxes(out / "gt.txt", scene.boxes)
    config_mod.dump(cfg, out / "rig.cfg")
    return EXIT_OK


def cmd_fuse(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args)
    n = len(cfg.sensors)
    if len(args.inputs) != n:
        raise CliError(f"{len(args.inputs)} inputs for a {n}-sensor rig")
    rig = SensorRig(tuple(cfg.extrinsics()), tuple(cfg.priors()), cfg.pivot)
    try:
        if args.scheme == "input":
            clouds = [formats.read_cloud(p) for p in args.inputs]
            formats.write_tagged_cloud(out / "fused.bin", input_fuse(rig, clouds))
        elif args.scheme == "feature":
            origin, res, dims = default_grid_geometry()
            grids = [voxelize_mean(formats.read_cloud(p), origin, res, dims) for p in args.inputs]
            formats.write_grid(out / "fused_grid.csv", feature_fuse(rig, grids))
        else:
            sets = [formats.read_boxes(p) for p in args.inputs]
            formats.write_boxes(out / "fused.txt", result_fuse(rig, sets, cfg.sweep.nms_iou))
    except FusionError as exc:
        raise CliError(str(exc)) from None
    return EXIT_OK


EVAL_HEADER = ("difficulty", "iou_threshold", "ap", "n_gt", "n_det")


def cmd_eval(args) -> int:
    dets = formats.read_boxes(args.det)
    gts = formats.read_boxes(args.gt)
    rows = [tuple(r[k] for k in EVAL_HEADER) for r in evaluation_report([(dets, gts)])]
    _emit(args, "eval.csv", EVAL_HEADER, rows)
    return EXIT_OK


def cmd_alpha_sweep(args) -> int:
    cfg = _load_config(args)
    try:
        results = alpha_sweep(cfg, alphas=args.alpha, n_seeds=args.n_seeds)
    except SceneError as exc:
        raise CliError(str(exc)) from None
    _emit(args, "alpha_sweep.csv", SWEEP_HEADER, sweep_rows(results))
    return EXIT_OK


def _emit(args, name: str, header, rows) -> None:
    if args.out:
        path = formats.ensure_dir(args.out) / name
        formats.write_csv(path, header, rows)
        log.info("wrote %s", path)
    else:
        formats.write_csv(sys.stdout, header, rows)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="experiment config file")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--out", type=Path, help="output directory (stdout for CSV if omitted)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="lidarfuse", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("propagate-example", parents=[common], help="covariance of the reference landmark per alpha")
    s.add_argument("--alpha", type=_alphas)
    s.set_defaults(func=cmd_propagate_example)

    s = sub.add_parser("plane-sweep", parents=[common], help="weighted vs unweighted plane fitting over alpha")
    s.add_argument("--alpha", type=_alphas)
    s.set_defaults(func=cmd_plane_sweep)

    s = sub.add_parser("gen-scene", parents=[common], help="write per-sensor clouds and ground-truth boxes")
    s.set_defaults(func=cmd_gen_scene)

    s = sub.add_parser("fuse", parents=[common], help="fuse clouds (input/feature) or box files (result)")
    s.add_argument("--scheme", choices=("input", "feature", "result"), required=True)
    s.add_argument("inputs", nargs="+", type=Path, help="one file per sensor, in config order")
    s.set_defaults(func=cmd_fuse)

    s = sub.add_parser("eval", parents=[common], help="AP report for a detection file against ground truth")
    s.add_argument("--det", type=Path, required=True)
    s.add_argument("--gt", type=Path, required=True)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("alpha-sweep", parents=[common], help="end-to-end detection robustness over alpha")
    s.add_argument("--alpha", type=_alphas)
    s.add_argument("--n-seeds", type=int)
    s.set_defaults(func=cmd_alpha_sweep)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (config_mod.ConfigError, formats.FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ArithmeticError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
