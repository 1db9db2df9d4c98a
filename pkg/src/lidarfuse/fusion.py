"""Input-, feature- and result-level fusion of several LiDARs into the base frame."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .boxes import DEFAULT_NMS_IOU, Box3D, nms_indices, transform_box
from .perturbation import ThetaPrior
from .propagation import PerturbationPrior, TaggedPointCloud, propagate_cloud
from .se3 import RigidTransform

DEFAULT_VOXEL_ORIGIN = (-35.2, -40.0, -5.7)
DEFAULT_VOXEL_UPPER = (35.2, 40.0, 2.0)
DEFAULT_VOXEL_SIZE = (0.05, 0.05, 0.14)


class FusionError(ValueError):
    pass


def _effective(prior) -> PerturbationPrior:
    if isinstance(prior, ThetaPrior):
        return prior.effective
    if isinstance(prior, PerturbationPrior):
        return prior
    raise FusionError(f"unsupported prior type {type(prior).__name__}")


@dataclass(frozen=True)
class SensorRig:
    """Extrinsics (base <- LiDAR i) with one prior per sensor."""

    extrinsics: tuple
    priors: tuple
    pivot: str = "base"

    def __post_init__(self):
        ext = tuple(self.extrinsics)
        pri = tuple(self.priors)
        if not ext:
            raise FusionError("a rig needs at least one sensor")
        if len(ext) != len(pri):
            raise FusionError("extrinsics and priors differ in length")
        object.__setattr__(self, "extrinsics", ext)
        object.__setattr__(self, "priors", pri)

    def __len__(self) -> int:
        return len(self.extrinsics)

    @classmethod
    def identity(cls, n: int = 1, prior=None) -> SensorRig:
        prior = prior if prior is not None else PerturbationPrior.zero()
        return cls((RigidTransform.identity(),) * n, (prior,) * n)

    def with_extrinsics(self, extrinsics) -> SensorRig:
        return SensorRig(tuple(extrinsics), self.priors, self.pivot)


def _check_count(rig: SensorRig, items, what: str) -> None:
    if len(items) != len(rig):
        raise FusionError(f"got {len(items)} {what} for a {len(rig)}-sensor rig")


def input_fuse(rig: SensorRig, clouds: Sequence, keep_covariances: bool = False) -> TaggedPointCloud:
    """Concatenate all clouds in the base frame, in sensor order, with per-point traces."""
    _check_count(rig, clouds, "clouds")
    parts = [
        propagate_cloud(t, cloud, _effective(prior), rig.pivot, keep_covariances)
        for t, prior, cloud in zip(rig.extrinsics, rig.priors, clouds)
    ]
    return TaggedPointCloud.concatenate(parts)


@dataclass
class VoxelGrid:
    """Sparse voxel grid; cells sorted by linear index.

    ``features[k]`` is the mean point of cell ``indices[k]`` and ``counts[k]``
    the number of points that fell into it.
    """

    origin: np.ndarray
    resolution: np.ndarray
    dims: tuple
    indices: np.ndarray
    features: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=float).reshape(3)
        self.resolution = np.asarray(self.resolution, dtype=float).reshape(3)
        self.dims = tuple(int(d) for d in self.dims)
        self.indices = np.asarray(self.indices, dtype=np.int64).reshape(-1, 3)
        self.features = np.asarray(self.features, dtype=float).reshape(-1, 3)
        self.counts = np.asarray(self.counts, dtype=np.int64).reshape(-1)

    def __len__(self) -> int:
        return len(self.indices)

    def same_geometry(self, other: VoxelGrid) -> bool:
        return (
            self.dims == other.dims
            and np.array_equal(self.origin, other.origin)
            and np.array_equal(self.resolution, other.resolution)
        )

    def linear_indices(self) -> np.ndarray:
        return np.ravel_multi_index(self.indices.T, self.dims) if len(self) else np.zeros(0, np.int64)

    def cell_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lo = self.origin + self.indices * self.resolution
        return lo, lo + self.resolution

    def as_dict(self) -> dict:
        return {
            tuple(int(v) for v in idx): (tuple(f), int(c))
            for idx, f, c in zip(self.indices, self.features, self.counts)
        }

    def mean_points(self) -> np.ndarray:
        return self.features.copy()


def grid_dims(origin, upper, resolution) -> tuple:
    span = (np.asarray(upper, float) - np.asarray(origin, float)) / np.asarray(resolution, float)
    return tuple(int(v) for v in np.round(span))


def default_grid_geometry():
    origin = np.array(DEFAULT_VOXEL_ORIGIN)
    res = np.array(DEFAULT_VOXEL_SIZE)
    return origin, res, grid_dims(DEFAULT_VOXEL_ORIGIN, DEFAULT_VOXEL_UPPER, DEFAULT_VOXEL_SIZE)


def _bin(points: np.ndarray, origin, resolution, dims):
    idx = np.floor((points - origin) / resolution).astype(np.int64)
    ok = np.all((idx >= 0) & (idx < np.asarray(dims)), axis=1)
    return idx, ok


def voxelize_mean(cloud, origin, resolution, dims) -> VoxelGrid:
    """Mean point and count per occupied voxel; points outside the range are dropped."""
    resolution = np.asarray(resolution, dtype=float).reshape(3)
    if np.any(resolution <= 0):
        raise FusionError("voxel resolution must be positive")
    origin = np.asarray(origin, dtype=float).reshape(3)
    pts = cloud.points if isinstance(cloud, TaggedPointCloud) else np.asarray(cloud, float).reshape(-1, 3)
    idx, ok = _bin(pts, origin, resolution, dims)
    pts, idx = pts[ok], idx[ok]
    if len(pts) == 0:
        return VoxelGrid(origin, resolution, dims, np.zeros((0, 3)), np.zeros((0, 3)), np.zeros(0))
    lin = np.ravel_multi_index(idx.T, dims)
    cells, inv, counts = np.unique(lin, return_inverse=True, return_counts=True)
    sums = np.zeros((len(cells), 3))
    np.add.at(sums, inv, pts)
    means = sums / counts[:, None]
    # rounding can push a mean a hair past its cell; keep it inside
    cell_idx = np.stack(np.unravel_index(cells, dims), axis=1)
    lo = origin + cell_idx * resolution
    means = np.clip(means, lo, np.nextafter(lo + resolution, -np.inf))
    return VoxelGrid(origin, resolution, dims, cell_idx, means, counts)


def _max_rebin(features: np.ndarray, counts: np.ndarray, origin, resolution, dims) -> VoxelGrid:
    idx, ok = _bin(features, origin, resolution, dims)
    features, counts, idx = features[ok], counts[ok], idx[ok]
    if len(features) == 0:
        return VoxelGrid(origin, resolution, dims, np.zeros((0, 3)), np.zeros((0, 3)), np.zeros(0))
    lin = np.ravel_multi_index(idx.T, dims)
    cells, inv = np.unique(lin, return_inverse=True)
    fused = np.full((len(cells), 3), -np.inf)
    np.maximum.at(fused, inv, features)
    total = np.zeros(len(cells), dtype=np.int64)
    np.add.at(total, inv, counts)
    cell_idx = np.stack(np.unravel_index(cells, dims), axis=1)
    return VoxelGrid(origin, resolution, dims, cell_idx, fused, total)


def feature_fuse(rig: SensorRig, grids: Sequence[VoxelGrid]) -> VoxelGrid:
    """Move each grid's cell features into the base frame, re-bin, and max-fuse collisions.

    The max is taken per feature component; counts are summed.
    """
    _check_count(rig, grids, "grids")
    ref = grids[0]
    for g in grids[1:]:
        if not g.same_geometry(ref):
            raise FusionError("grids must share origin, resolution and dims")
    feats, counts = [], []
    for t, g in zip(rig.extrinsics, grids):
        feats.append(t.apply(g.features) if len(g) else np.zeros((0, 3)))
        counts.append(g.counts)
    return _max_rebin(np.concatenate(feats), np.concatenate(counts), ref.origin, ref.resolution, ref.dims)


def merge_grids(grids: Sequence[VoxelGrid]) -> VoxelGrid:
    """Max-fuse grids already in a common frame."""
    return feature_fuse(SensorRig.identity(len(grids)), grids)


def result_fuse_tagged(
    rig: SensorRig, box_sets: Sequence[Sequence[Box3D]], iou_threshold: float = DEFAULT_NMS_IOU
) -> list[tuple[Box3D, tuple[int, int]]]:
    """Result fusion returning each kept box with its ``(sensor, index)`` origin."""
    _check_count(rig, box_sets, "box sets")
    for i, t in enumerate(rig.extrinsics):
        if not t.is_yaw_only():
            raise FusionError(f"sensor {i} extrinsic is not a pure yaw rotation")
    pool: list[Box3D] = []
    tags: list[tuple[int, int]] = []
    for s, (t, boxes) in enumerate(zip(rig.extrinsics, box_sets)):
        for j, b in enumerate(boxes):
            pool.append(transform_box(t, b))
            tags.append((s, j))
    return [(pool[k], tags[k]) for k in nms_indices(pool, iou_threshold)]


def result_fuse(
    rig: SensorRig, box_sets: Sequence[Sequence[Box3D]], iou_threshold: float = DEFAULT_NMS_IOU
) -> list[Box3D]:
    return [b for b, _ in result_fuse_tagged(rig, box_sets, iou_threshold)]
