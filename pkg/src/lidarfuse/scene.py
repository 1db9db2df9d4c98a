"""Synthetic multi-LiDAR scenes: non-overlapping boxes on a ground plane.

Each sensor returns uniformly sampled points on the box faces that face it
and on the ground, minus anything hidden behind another box. No beam
pattern is simulated; visibility is a straight segment test from the sensor
origin to each candidate point.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .boxes import Box3D, to_box_frame
from .perturbation import Seed, derive_seed, make_rng
from .se3 import RigidTransform

GROUND_LABEL = -1


class SceneError(RuntimeError):
    """The requested boxes cannot be placed in the region."""


@dataclass(frozen=True)
class SceneSpec:
    n_boxes: int = 20
    region: tuple = (-34.0, 34.0, -34.0, 34.0)  # x_min, x_max, y_min, y_max (m)
    length_range: tuple = (3.6, 4.8)
    width_range: tuple = (1.6, 2.0)
    height_range: tuple = (1.45, 1.9)
    face_density: float = 20.0  # points per m² of visible face
    ground_density: float = 0.3  # points per m² of ground
    noise_std: float = 0.02
    min_gap: float = 0.8  # clearance between circumscribed footprint circles (m)
    keep_out: float = 5.0  # radius kept free around the base origin (m)
    max_range: float = 70.0
    max_attempts: int = 5000

    def __post_init__(self):
        if self.n_boxes < 0:
            raise ValueError("n_boxes must be non-negative")
        x0, x1, y0, y1 = self.region
        if not (x1 > x0 and y1 > y0):
            raise ValueError("region bounds are inverted")


@dataclass
class Scene:
    boxes: list
    sensor_clouds: list  # per sensor, (N, 3) in the sensor frame, noisy
    base_points: list = field(default_factory=list)  # per sensor, noise-free, base frame
    labels: list = field(default_factory=list)  # per sensor, box index or GROUND_LABEL


def place_boxes(spec: SceneSpec, rng: np.random.Generator) -> list[Box3D]:
    x0, x1, y0, y1 = spec.region
    boxes: list[Box3D] = []
    radii: list[float] = []
    attempts = 0
    while len(boxes) < spec.n_boxes:
        attempts += 1
        if attempts > spec.max_attempts:
            raise SceneError(
                f"placed {len(boxes)} of {spec.n_boxes} boxes after {spec.max_attempts} attempts"
            )
        cx, cy = rng.uniform(x0, x1), rng.uniform(y0, y1)
        l = rng.uniform(*spec.length_range)
        w = rng.uniform(*spec.width_range)
        h = rng.uniform(*spec.height_range)
        yaw = rng.uniform(-np.pi, np.pi)
        r = 0.5 * np.hypot(l, w)
        if np.hypot(cx, cy) < spec.keep_out + r:
            continue
        if any(np.hypot(cx - b.center[0], cy - b.center[1]) < r + rb + spec.min_gap for b, rb in zip(boxes, radii)):
            continue
        boxes.append(Box3D(0, 1.0, (cx, cy, 0.0), (l, w, h), yaw))
        radii.append(r)
    return boxes


def box_faces(box: Box3D):
    """``(center, normal, axis_u, axis_v)`` per face in the base frame; half extents live in the axes."""
    l, w, h = box.size
    c, s = np.cos(box.yaw), np.sin(box.yaw)
    ex = np.array([c, s, 0.0])
    ey = np.array([-s, c, 0.0])
    ez = np.array([0.0, 0.0, 1.0])
    mid = np.array(box.center) + ez * (0.5 * h)
    return [
        (mid + ex * (0.5 * l), ex, ey * (0.5 * w), ez * (0.5 * h)),
        (mid - ex * (0.5 * l), -ex, ey * (0.5 * w), ez * (0.5 * h)),
        (mid + ey * (0.5 * w), ey, ex * (0.5 * l), ez * (0.5 * h)),
        (mid - ey * (0.5 * w), -ey, ex * (0.5 * l), ez * (0.5 * h)),
        (mid + ez * (0.5 * h), ez, ex * (0.5 * l), ey * (0.5 * w)),
    ]


def segment_hits_box(origin: np.ndarray, targets: np.ndarray, box: Box3D, eps: float = 1e-9) -> np.ndarray:
    """Whether the open segment origin -> target passes through the box interior."""
    o = to_box_frame(box, origin[None])[0]
    q = to_box_frame(box, targets)
    d = q - o
    l, w, h = box.size
    lo = np.array([-0.5 * l, -0.5 * w, 0.0]) + eps
    hi = np.array([0.5 * l, 0.5 * w, h]) - eps
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = (lo - o) / d
        t2 = (hi - o) / d
    tnear = np.where(d == 0, np.where((o >= lo) & (o <= hi), -np.inf, np.inf), np.minimum(t1, t2))
    tfar = np.where(d == 0, np.where((o >= lo) & (o <= hi), np.inf, -np.inf), np.maximum(t1, t2))
    t_enter = np.maximum(tnear.max(axis=1), 0.0)
    t_exit = np.minimum(tfar.min(axis=1), 1.0)
    return t_enter < t_exit


def _sample_face(rng, center, axis_u, axis_v, density: float) -> np.ndarray:
    area = 4.0 * np.linalg.norm(axis_u) * np.linalg.norm(axis_v)
    n = int(round(density * area))
    uv = rng.uniform(-1.0, 1.0, size=(n, 2))
    return center + uv[:, :1] * axis_u + uv[:, 1:] * axis_v


def sense(spec: SceneSpec, boxes: Sequence[Box3D], sensor: RigidTransform, rng: np.random.Generator):
    """Noise-free base-frame points one sensor sees, with their source labels."""
    s = np.asarray(sensor.translation)
    pts, labels = [], []
    for k, box in enumerate(boxes):
        for center, normal, au, av in box_faces(box):
            if normal @ (s - center) <= 0.0:
                continue
            q = _sample_face(rng, center, au, av, spec.face_density)
            pts.append(q)
            labels.append(np.full(len(q), k))
    x0, x1, y0, y1 = spec.region
    n_ground = int(round(spec.ground_density * (x1 - x0) * (y1 - y0)))
    g = np.c_[rng.uniform(x0, x1, n_ground), rng.uniform(y0, y1, n_ground), np.zeros(n_ground)]
    pts.append(g)
    labels.append(np.full(n_ground, GROUND_LABEL))
    pts = np.concatenate(pts) if pts else np.zeros((0, 3))
    labels = np.concatenate(labels).astype(np.int64)
    keep = np.linalg.norm(pts - s, axis=1) <= spec.max_range
    for k, box in enumerate(boxes):
        cand = keep & (labels != k)
        if np.any(cand):
            hit = segment_hits_box(s, pts[cand], box)
            idx = np.where(cand)[0]
            keep[idx[hit]] = False
    return pts[keep], labels[keep]


def generate_scene(spec: SceneSpec, extrinsics: Sequence[RigidTransform], seed: Seed = 0) -> Scene:
    """Boxes plus one cloud per sensor (sensor frame, with measurement noise)."""
    boxes = place_boxes(spec, make_rng(derive_seed(seed, 0)))
    clouds, base_pts, labels = [], [], []
    for i, t in enumerate(extrinsics):
        rng = make_rng(derive_seed(seed, 1, i))
        pts, lab = sense(spec, boxes, t, rng)
        local = t.inverse().apply(pts)
        if spec.noise_std > 0 and len(local):
            local = local + rng.normal(0.0, spec.noise_std, size=local.shape)
        clouds.append(local)
        base_pts.append(pts)
        labels.append(lab)
    return Scene(boxes, clouds, base_pts, labels)
