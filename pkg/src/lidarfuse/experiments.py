"""Drivers behind the CLI: propagation example, plane sweep and the detection robustness sweep."""

from __future__ import annotations

import numpy as np

from .boxes import nms
from .config import RigConfig
from .detector import DetectorConfig, detect
from .evaluation import Difficulty, EvalConfig, evaluate
from .fusion import SensorRig, default_grid_geometry, feature_fuse, input_fuse, voxelize_mean
from .perturbation import derive_seed, inject, sample_perturbation
from .plane import fitting_sweep
from .propagation import propagate_point
from .scene import generate_scene
from .se3 import RigidTransform


def propagation_example(cfg: RigConfig) -> list[dict]:
    """Ξ at the reference landmark for each alpha, split into the alpha-linear part and the total."""
    pc = cfg.propagate
    t = RigidTransform.from_rpy(pc.rpy_deg, pc.translation, degrees=True)
    base = pc.prior()
    rows = []
    zero = propagate_point(t, pc.point, base.scaled(0.0), cfg.pivot).covariance
    for alpha in pc.alphas:
        full = propagate_point(t, pc.point, base.scaled(alpha), cfg.pivot).covariance
        for kind, m in (("extrinsic", full - zero), ("full", full)):
            rows.append({
                "alpha": float(alpha),
                "kind": kind,
                "matrix": m,
                "std": np.sqrt(np.clip(np.diag(m), 0.0, None)),
            })
    return rows


def plane_sweep(cfg: RigConfig, seed: int | None = None):
    pc = cfg.plane
    return fitting_sweep(
        pc.alphas,
        pc.trials,
        cfg.seed if seed is None else seed,
        n_points=pc.n_points,
        noise_std=pc.noise_std,
        plane=pc.pose(),
        extrinsics=RigidTransform.from_rpy(pc.rpy_deg, pc.translation, degrees=True),
        pivot=cfg.pivot,
    )


def noisy_extrinsics(cfg: RigConfig, alpha: float, seed) -> list[RigidTransform]:
    """Ground-truth extrinsics with bounded perturbation injected into each ``perturb`` sensor."""
    out = []
    for i, s in enumerate(cfg.sensors):
        t = s.extrinsics()
        if s.perturb:
            draw = sample_perturbation(s.prior(alpha), derive_seed(seed, 100, i))
            t = inject(t, draw, cfg.pivot)
        out.append(t)
    return out


def detect_all_schemes(cfg: RigConfig, clouds, alpha: float, seed, det_cfg: DetectorConfig = DetectorConfig()) -> dict:
    """Detections per method for one scene at one perturbation level.

    Every method sees the same noisy extrinsics. Per-sensor detection runs
    in the base frame so result fusion is plain NMS across sensors.
    """
    noisy = noisy_extrinsics(cfg, alpha, seed)
    priors = cfg.priors(alpha)
    rig = SensorRig(tuple(noisy), tuple(priors), cfg.pivot)
    out = {}
    per_sensor = []
    for i, (t, cloud) in enumerate(zip(noisy, clouds)):
        boxes = detect(t.apply(cloud), det_cfg)
        per_sensor.append(boxes)
        out[f"single_{cfg.sensors[i].name}"] = boxes
    fused = input_fuse(rig, clouds)
    out["input"] = detect(fused.points, det_cfg)
    certain = fused.traces <= cfg.sweep.uncertain_trace
    out["input_filtered"] = detect(fused.points[certain], det_cfg)
    origin, res, dims = default_grid_geometry()
    grids = [voxelize_mean(c, origin, res, dims) for c in clouds]
    out["feature"] = detect(feature_fuse(rig, grids).features, det_cfg)
    out["result"] = nms([b for boxes in per_sensor for b in boxes], cfg.sweep.nms_iou)
    return out


SWEEP_HEADER = ("method", "alpha", "difficulty", "iou_threshold", "ap_mean", "ap_std", "n_trials")


def alpha_sweep(cfg: RigConfig, alphas=None, n_seeds: int | None = None, seed: int | None = None) -> dict:
    """AP per ``(method, alpha, difficulty, iou)`` for each scene seed.

    The perturbation draw for a given seed and sensor is shared across
    alpha levels, so levels differ only in magnitude.
    """
    alphas = tuple(cfg.sweep.alphas if alphas is None else alphas)
    n_seeds = cfg.sweep.n_seeds if n_seeds is None else n_seeds
    root = cfg.seed if seed is None else seed
    extrinsics = cfg.extrinsics()
    results: dict = {}
    for k in range(n_seeds):
        scene_seed = derive_seed(root, k)
        scene = generate_scene(cfg.scene, extrinsics, scene_seed)
        for alpha in alphas:
            dets = detect_all_schemes(cfg, scene.sensor_clouds, alpha, scene_seed)
            for method, boxes in dets.items():
                for thr in (0.7, 0.5):
                    for diff in Difficulty:
                        curve, _, _ = evaluate([(boxes, scene.boxes)], EvalConfig(thr, diff))
                        results.setdefault((method, alpha, diff.label, thr), []).append(curve.ap)
    return results


def sweep_rows(results: dict) -> list[tuple]:
    rows = []
    for (method, alpha, diff, thr), aps in results.items():
        arr = np.array(aps, dtype=float)
        finite = arr[np.isfinite(arr)]
        mean = float(finite.mean()) if len(finite) else float("nan")
        std = float(finite.std()) if len(finite) else float("nan")
        rows.append((method, alpha, diff, thr, mean, std, len(finite)))
    return rows
