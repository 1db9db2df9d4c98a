"""Yaw-rotated 3D boxes: overlap, suppression, residual coding, point normalization.

Boxes use a bottom-center origin: ``center`` is the middle of the bottom
face, the box occupies ``[z, z + h]`` vertically, ``l`` runs along the
heading (local x) and ``w`` along local y.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .propagation import TaggedPointCloud

DEFAULT_NMS_IOU = 0.05
DEFAULT_CROP_MARGIN = 2.0


def wrap_angle(a):
    """Wrap into ``(-pi, pi]``."""
    w = np.mod(np.asarray(a, dtype=float) + np.pi, 2.0 * np.pi) - np.pi
    w = np.where(w <= -np.pi, w + 2.0 * np.pi, w)
    return float(w) if np.ndim(w) == 0 else w


@dataclass(frozen=True)
class Box3D:
    class_id: int
    score: float
    center: tuple
    size: tuple
    yaw: float

    def __post_init__(self):
        center = tuple(float(v) for v in self.center)
        size = tuple(float(v) for v in self.size)
        if len(center) != 3 or len(size) != 3:
            raise ValueError("center and size must have three components")
        if not all(s > 0 for s in size):
            raise ValueError(f"box size must be strictly positive, got {size}")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must lie in [0, 1], got {self.score}")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "size", size)
        object.__setattr__(self, "class_id", int(self.class_id))
        object.__setattr__(self, "score", float(self.score))
        object.__setattr__(self, "yaw", float(self.yaw))

    @property
    def volume(self) -> float:
        l, w, h = self.size
        return l * w * h

    def bev_corners(self) -> np.ndarray:
        """Counter-clockwise ``(4, 2)`` footprint corners."""
        l, w, _ = self.size
        c, s = np.cos(self.yaw), np.sin(self.yaw)
        local = np.array([[-l, -w], [l, -w], [l, w], [-l, w]]) * 0.5
        rot = np.array([[c, -s], [s, c]])
        return local @ rot.T + np.array(self.center[:2])

    def corners(self) -> np.ndarray:
        """``(8, 3)`` corners: bottom four then top four."""
        bev = self.bev_corners()
        z0 = self.center[2]
        z1 = z0 + self.size[2]
        return np.vstack([np.c_[bev, np.full(4, z0)], np.c_[bev, np.full(4, z1)]])

    def with_score(self, score: float) -> Box3D:
        return replace(self, score=score)

    def as_array(self) -> np.ndarray:
        return np.array([*self.center, *self.size, self.yaw])


# ---------------------------------------------------------------------------
# BEV polygon clipping
# ---------------------------------------------------------------------------

def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def clip_convex(subject: np.ndarray, clip: np.ndarray) -> np.ndarray:
    """Sutherland-Hodgman clip of a convex polygon by a convex ccw polygon."""
    output = [tuple(p) for p in subject]
    n = len(clip)
    for i in range(n):
        if not output:
            break
        a, b = clip[i], clip[(i + 1) % n]
        inputs, output = output, []
        prev = inputs[-1]
        prev_in = _cross(a, b, prev) >= 0.0
        for cur in inputs:
            cur_in = _cross(a, b, cur) >= 0.0
            if cur_in != prev_in:
                # segment prev->cur crosses the clip line a->b
                d1 = _cross(a, b, prev)
                d2 = _cross(a, b, cur)
                t = d1 / (d1 - d2)
                output.append((prev[0] + t * (cur[0] - prev[0]), prev[1] + t * (cur[1] - prev[1])))
            if cur_in:
                output.append(cur)
            prev, prev_in = cur, cur_in
    return np.array(output, dtype=float).reshape(-1, 2)


def polygon_area(poly: np.ndarray) -> float:
    if len(poly) < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def bev_intersection_area(a: Box3D, b: Box3D) -> float:
    ca, cb = np.array(a.center[:2]), np.array(b.center[:2])
    reach = 0.5 * (np.hypot(*a.size[:2]) + np.hypot(*b.size[:2]))
    if np.linalg.norm(ca - cb) >= reach:
        return 0.0
    return polygon_area(clip_convex(a.bev_corners(), b.bev_corners()))


def iou_3d(a: Box3D, b: Box3D) -> float:
    za0, za1 = a.center[2], a.center[2] + a.size[2]
    zb0, zb1 = b.center[2], b.center[2] + b.size[2]
    dz = min(za1, zb1) - max(za0, zb0)
    if dz <= 0.0:
        return 0.0
    area = bev_intersection_area(a, b)
    if area <= 0.0:
        return 0.0
    inter = area * dz
    union = a.volume + b.volume - inter
    return float(min(max(inter / union, 0.0), 1.0))


def iou_matrix(boxes_a: Sequence[Box3D], boxes_b: Sequence[Box3D]) -> np.ndarray:
    out = np.zeros((len(boxes_a), len(boxes_b)))
    for i, a in enumerate(boxes_a):
        for j, b in enumerate(boxes_b):
            out[i, j] = iou_3d(a, b)
    return out


def score_order(boxes: Sequence[Box3D]) -> list[int]:
    """Indices by descending score, ties broken by input index."""
    return sorted(range(len(boxes)), key=lambda i: (-boxes[i].score, i))


def nms_indices(boxes: Sequence[Box3D], iou_threshold: float = DEFAULT_NMS_IOU) -> list[int]:
    if not 0.0 <= iou_threshold <= 1.0:
        raise ValueError("iou_threshold must lie in [0, 1]")
    kept: list[int] = []
    for i in score_order(boxes):
        if all(iou_3d(boxes[i], boxes[k]) <= iou_threshold for k in kept):
            kept.append(i)
    return kept


def nms(boxes: Sequence[Box3D], iou_threshold: float = DEFAULT_NMS_IOU) -> list[Box3D]:
    """Greedy suppression; kept boxes come back in descending-score order."""
    return [boxes[i] for i in nms_indices(boxes, iou_threshold)]


# ---------------------------------------------------------------------------
# regression residuals
# ---------------------------------------------------------------------------

def encode_residual(gt: Box3D, proposal: Box3D) -> np.ndarray:
    """8-vector residual of ``gt`` relative to ``proposal``."""
    x, y, z = gt.center
    l, w, h = gt.size
    xp, yp, zp = proposal.center
    lp, wp, hp = proposal.size
    if min(lp, wp, hp) <= 0:
        raise ValueError("degenerate proposal size")
    dyaw = gt.yaw - proposal.yaw
    return np.array([
        (x - xp) / lp,
        (y - yp) / wp,
        (z - zp) / hp,
        (l - lp) / lp,
        (w - wp) / wp,
        (h - hp) / hp,
        np.sin(dyaw),
        np.cos(dyaw),
    ])


def decode_residual(u, proposal: Box3D) -> Box3D:
    u = np.asarray(u, dtype=float).reshape(8)
    if u[6] ** 2 + u[7] ** 2 <= 1e-12:
        raise ValueError("degenerate sin/cos pair in residual")
    xp, yp, zp = proposal.center
    lp, wp, hp = proposal.size
    return Box3D(
        proposal.class_id,
        proposal.score,
        (xp + u[0] * lp, yp + u[1] * wp, zp + u[2] * hp),
        (lp * (1.0 + u[3]), wp * (1.0 + u[4]), hp * (1.0 + u[5])),
        wrap_angle(proposal.yaw + np.arctan2(u[6], u[7])),
    )


# ---------------------------------------------------------------------------
# proposal-frame points
# ---------------------------------------------------------------------------

def to_box_frame(proposal: Box3D, points) -> np.ndarray:
    """Points expressed in the box frame (bottom-center origin, x along heading), unscaled."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    c, s = np.cos(proposal.yaw), np.sin(proposal.yaw)
    d = pts - np.array(proposal.center)
    return np.c_[c * d[:, 0] + s * d[:, 1], -s * d[:, 0] + c * d[:, 1], d[:, 2]]


def normalize_points(proposal: Box3D, points) -> np.ndarray:
    """Box-frame coordinates divided by ``(l, w, h)``; the box maps to ``[-.5,.5]² × [0,1]``."""
    return to_box_frame(proposal, points) / np.array(proposal.size)


def denormalize_points(proposal: Box3D, normalized) -> np.ndarray:
    q = np.asarray(normalized, dtype=float).reshape(-1, 3) * np.array(proposal.size)
    c, s = np.cos(proposal.yaw), np.sin(proposal.yaw)
    return np.c_[c * q[:, 0] - s * q[:, 1], s * q[:, 0] + c * q[:, 1], q[:, 2]] + np.array(proposal.center)


def inside_mask(proposal: Box3D, points, margin: float = 0.0) -> np.ndarray:
    if margin < 0:
        raise ValueError("margin must be non-negative")
    local = to_box_frame(proposal, points)
    l, w, h = proposal.size
    return (
        (np.abs(local[:, 0]) <= 0.5 * l + margin)
        & (np.abs(local[:, 1]) <= 0.5 * w + margin)
        & (local[:, 2] >= -margin)
        & (local[:, 2] <= h + margin)
    )


def crop_with_margin(proposal: Box3D, cloud: TaggedPointCloud, margin: float = DEFAULT_CROP_MARGIN) -> TaggedPointCloud:
    """Points inside the proposal grown by ``margin`` on every side, traces carried along."""
    return cloud.subset(inside_mask(proposal, cloud.points, margin))


def transform_box(t, box: Box3D) -> Box3D:
    """Move a box through a yaw-only rigid transform."""
    if not t.is_yaw_only():
        raise ValueError("box transforms require a yaw-only rotation")
    center = t.apply(np.array(box.center))
    return replace(box, center=tuple(center), yaw=wrap_angle(box.yaw + t.yaw()))
