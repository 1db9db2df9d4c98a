"""Independent reference implementations used as test oracles."""

import numpy as np
from shapely.geometry import Polygon

from lidarfuse.boxes import Box3D, iou_3d
from lidarfuse.se3 import so3_exp


def random_box(rng, spread=3.0, class_id=0, score=None, z_spread=0.5):
    return Box3D(
        class_id,
        float(rng.uniform(0.01, 0.99)) if score is None else score,
        (rng.uniform(-spread, spread), rng.uniform(-spread, spread), rng.uniform(-z_spread, z_spread)),
        (rng.uniform(0.5, 5.0), rng.uniform(0.5, 3.0), rng.uniform(0.5, 2.5)),
        rng.uniform(-np.pi, np.pi),
    )


def random_rotation(rng):
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def random_spd(rng, scale):
    a = rng.normal(size=(3, 3))
    m = a @ a.T + 0.5 * np.eye(3)
    return m * (scale**2 / np.trace(m) * 3)


def shapely_iou(a: Box3D, b: Box3D) -> float:
    inter_bev = Polygon(a.bev_corners()).intersection(Polygon(b.bev_corners())).area
    dz = min(a.center[2] + a.size[2], b.center[2] + b.size[2]) - max(a.center[2], b.center[2])
    inter = inter_bev * max(dz, 0.0)
    return inter / (a.volume + b.volume - inter)


def monte_carlo_iou(a: Box3D, b: Box3D, n: int, rng) -> float:
    """IoU from uniform samples over the joint axis-aligned bounding volume (float32 for speed)."""
    allc = np.vstack([a.corners(), b.corners()])
    lo, hi = allc.min(axis=0), allc.max(axis=0)
    pts = rng.random((n, 3), dtype=np.float32) * (hi - lo).astype(np.float32) + lo.astype(np.float32)

    def inside(box):
        c, s = np.float32(np.cos(box.yaw)), np.float32(np.sin(box.yaw))
        dx = pts[:, 0] - np.float32(box.center[0])
        dy = pts[:, 1] - np.float32(box.center[1])
        dz = pts[:, 2] - np.float32(box.center[2])
        l, w, h = (np.float32(v) for v in box.size)
        return (np.abs(c * dx + s * dy) <= l / 2) & (np.abs(c * dy - s * dx) <= w / 2) & (dz >= 0) & (dz <= h)

    ia, ib = inside(a), inside(b)
    union = np.count_nonzero(ia | ib)
    return np.count_nonzero(ia & ib) / union if union else 0.0


def brute_force_nms(boxes, thr):
    """The unique kept set K: a box is in K iff no higher-ranked box of K overlaps it above ``thr``.

    Found by checking every subset.
    """
    n = len(boxes)
    rank = sorted(range(n), key=lambda i: (-boxes[i].score, i))
    pos = np.empty(n, dtype=int)
    pos[rank] = np.arange(n)
    sup = np.zeros((n, n), dtype=int)
    for i in range(n):
        for j in range(n):
            sup[j, i] = pos[j] < pos[i] and iou_3d(boxes[i], boxes[j]) > thr
    subsets = (np.arange(2**n)[:, None] >> np.arange(n)) & 1
    covered = (subsets @ sup) > 0
    ok = np.all(subsets.astype(bool) == ~covered, axis=1)
    hits = np.flatnonzero(ok)
    assert len(hits) == 1
    return sorted(np.flatnonzero(subsets[hits[0]]).tolist(), key=lambda i: pos[i])


def reference_match(dets, gts, thr):
    """Plain-loop greedy matcher: ``[(det_index, matched)]`` in rank order."""
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))
    used = [False] * len(gts)
    out = []
    for i in order:
        best, best_j = -1.0, -1
        for j, g in enumerate(gts):
            if used[j]:
                continue
            v = iou_3d(dets[i], g)
            if v > best:
                best, best_j = v, j
        hit = best_j >= 0 and best >= thr
        if hit:
            used[best_j] = True
        out.append((i, hit))
    return out


def monte_carlo_covariance(r, t, p, P, Phi, Z, n, rng, pivot="base"):
    """Sample covariance of the perturbed point under the left-perturbation model."""
    L = [np.linalg.cholesky(m) for m in (P, Phi, Z)]
    rho = rng.standard_normal((n, 3)) @ L[0].T
    phi = rng.standard_normal((n, 3)) @ L[1].T
    zeta = rng.standard_normal((n, 3)) @ L[2].T
    e = so3_exp(phi)
    q = (p + zeta) @ r.T
    if pivot == "base":
        y = np.einsum("nij,nj->ni", e, q + t) + rho
    else:
        y = np.einsum("nij,nj->ni", e, q) + t + rho
    return np.cov(y, rowvar=False)


def finite_diff(f, x, h=1e-6):
    x = np.asarray(x, dtype=float)
    cols = []
    for k in range(x.size):
        d = np.zeros_like(x)
        d.flat[k] = h
        cols.append((np.asarray(f(x + d)) - np.asarray(f(x - d))) / (2 * h))
    return np.stack(cols, axis=-1)
