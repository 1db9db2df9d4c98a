"""A geometric stand-in for a learned stage-1 detector.

Points above the ground are binned on a BEV grid, connected components
become clusters, and each cluster gets an L-shape rectangle fit of its
footprint, extruded from the ground to its highest point. Score grows with
point count. It sees only what the cloud shows, so partially observed
objects come out undersized and misplaced points corrupt the fit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .boxes import Box3D, wrap_angle


@dataclass(frozen=True)
class DetectorConfig:
    ground_z: float = 0.0
    ground_clearance: float = 0.25
    max_height: float = 3.5
    cell: float = 0.2
    min_points: int = 10
    score_scale: float = 80.0
    max_length: float = 7.0
    max_width: float = 3.5
    min_extent: float = 0.05


def _closeness(xy: np.ndarray, angles: np.ndarray, d0: float) -> np.ndarray:
    c, s = np.cos(angles), np.sin(angles)
    u = xy[:, :1] * c + xy[:, 1:] * s
    v = -xy[:, :1] * s + xy[:, 1:] * c
    du = np.minimum(u - u.min(axis=0), u.max(axis=0) - u)
    dv = np.minimum(v - v.min(axis=0), v.max(axis=0) - v)
    return (1.0 / np.maximum(np.minimum(du, dv), d0)).sum(axis=0)


def fit_rectangle(xy: np.ndarray, d0: float = 0.01, step_deg: float = 1.0):
    """``(center_xy, (length, width), yaw)`` of the rectangle whose edges hug the points.

    Orientation maximizes the summed inverse distance of points to their
    nearest edge (closeness criterion): a coarse sweep over [0, 90) degrees,
    then a fine sweep around the winner. Length >= width.
    """
    coarse = np.deg2rad(np.arange(0.0, 90.0, step_deg))
    a0 = coarse[np.argmax(_closeness(xy, coarse, d0))]
    fine = a0 + np.deg2rad(np.linspace(-step_deg, step_deg, 21))
    a = float(fine[np.argmax(_closeness(xy, fine, d0))])
    c, s = np.cos(a), np.sin(a)
    local = xy @ np.array([[c, -s], [s, c]])
    lo, hi = local.min(axis=0), local.max(axis=0)
    mid = 0.5 * (lo + hi)
    center = np.array([c * mid[0] - s * mid[1], s * mid[0] + c * mid[1]])
    ext = hi - lo
    if ext[0] >= ext[1]:
        return center, (ext[0], ext[1]), wrap_angle(a)
    return center, (ext[1], ext[0]), wrap_angle(a + np.pi / 2)


def cluster_labels(points: np.ndarray, cfg: DetectorConfig):
    ij = np.floor(points[:, :2] / cfg.cell).astype(np.int64)
    base = ij.min(axis=0)
    ij -= base
    shape = tuple(ij.max(axis=0) + 1)
    occ = np.zeros(shape, dtype=bool)
    occ[ij[:, 0], ij[:, 1]] = True
    lab, n = ndimage.label(occ, structure=np.ones((3, 3), dtype=int))
    return lab[ij[:, 0], ij[:, 1]], n


def detect(points, cfg: DetectorConfig = DetectorConfig(), class_id: int = 0) -> list[Box3D]:
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    z = pts[:, 2] - cfg.ground_z
    pts = pts[(z > cfg.ground_clearance) & (z < cfg.max_height)]
    if len(pts) < cfg.min_points:
        return []
    labels, n = cluster_labels(pts, cfg)
    order = np.argsort(labels, kind="stable")
    bounds = np.searchsorted(labels[order], np.arange(1, n + 2))
    boxes = []
    for k in range(n):
        members = pts[order[bounds[k]:bounds[k + 1]]]
        if len(members) < cfg.min_points:
            continue
        center, (l, w), yaw = fit_rectangle(members[:, :2])
        h = members[:, 2].max() - cfg.ground_z
        if l > cfg.max_length or w > cfg.max_width or h > cfg.max_height:
            continue
        l, w = max(l, cfg.min_extent), max(w, cfg.min_extent)
        score = 1.0 - np.exp(-len(members) / cfg.score_scale)
        boxes.append(Box3D(class_id, score, (center[0], center[1], cfg.ground_z), (l, w, h), yaw))
    return boxes
