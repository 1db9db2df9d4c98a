"""Uncertainty-weighted plane fitting on a synthetic two-LiDAR scene.

Planes are written ``x · p = 1``. One LiDAR defines the base frame and is
exact; the second sees its half of the points through perturbed extrinsics.
Weighting each point by ``1 / tr(Ξ)`` lets the fit discount the points the
perturbed sensor contributes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .perturbation import (
    DEFAULT_ALPHAS,
    Seed,
    ThetaPrior,
    default_theta,
    derive_seed,
    inject,
    make_rng,
    sample_perturbation,
)
from .propagation import PerturbationPrior, propagate_cloud
from .se3 import RigidTransform

TRACE_EPS = 1e-12
DET_TOL = 1e-12

# extrinsics of the second LiDAR in the reference experiment
REFERENCE_RPY_DEG = (10.0, 10.0, 10.0)
REFERENCE_TRANSLATION = (1.0, 1.0, 1.0)


class PlaneFitError(ArithmeticError):
    """The weighted normal matrix is (numerically) singular."""


@dataclass(frozen=True)
class PlaneCoefficients:
    x: np.ndarray

    @property
    def normal(self) -> np.ndarray:
        return self.x / np.linalg.norm(self.x)

    @property
    def distance(self) -> float:
        return float(1.0 / np.linalg.norm(self.x))


@dataclass(frozen=True)
class PlanePose:
    """A square patch of plane ``normal · p = distance`` centred at ``center``."""

    normal: tuple = (1.0, 1.0, 1.0)
    center: tuple = (10.0, 10.0, 10.0)
    extent: float = 10.0

    @property
    def unit_normal(self) -> np.ndarray:
        n = np.asarray(self.normal, dtype=float)
        return n / np.linalg.norm(n)

    @property
    def distance(self) -> float:
        return float(self.unit_normal @ np.asarray(self.center, dtype=float))

    @property
    def coefficients(self) -> np.ndarray:
        return self.unit_normal / self.distance


# two documented poses: a slanted patch around the landmark [10, 10, 10] m and a ground patch
SLANTED_PLANE = PlanePose()
GROUND_PLANE = PlanePose(normal=(0.0, 0.0, -1.0), center=(10.0, 0.0, -1.8), extent=16.0)


@dataclass
class FitReport:
    alpha: float
    error_weighted: float
    error_unweighted: float
    trials: int
    failures: int = 0
    weighted_errors: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)
    unweighted_errors: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)


def fit_plane(points, weights=None) -> PlaneCoefficients:
    """Solve ``(AᵀWA) x = AᵀW 1`` for the rows of ``points``."""
    a = np.asarray(points, dtype=float).reshape(-1, 3)
    w = np.ones(len(a)) if weights is None else np.asarray(weights, dtype=float).reshape(-1)
    if len(w) != len(a):
        raise ValueError("weights and points differ in length")
    if np.any(w < 0) or not np.any(w > 0):
        raise ValueError("weights must be non-negative and not all zero")
    if len(a) < 3:
        raise PlaneFitError("need at least three points")
    aw = a * w[:, None]
    normal = a.T @ aw
    rhs = aw.sum(axis=0)
    scale = np.trace(normal) / 3.0
    if scale <= 0 or abs(np.linalg.det(normal)) < DET_TOL * scale**3:
        raise PlaneFitError("normal matrix is rank deficient")
    return PlaneCoefficients(np.linalg.solve(normal, rhs))


def make_scene(n_points: int = 10000, noise_std: float = 0.02, rng_seed: Seed = 0, plane: PlanePose = SLANTED_PLANE):
    """Noisy samples of a plane patch, split randomly into two equal halves.

    Returns ``(cloud_a, cloud_b, x_gt)``, all in the base frame.
    """
    if n_points < 6:
        raise ValueError("n_points must be at least 6")
    if plane.distance < 0.5:
        raise ValueError("plane must lie at least 0.5 m from the origin")
    rng = make_rng(rng_seed)
    n = plane.unit_normal
    # orthonormal in-plane basis
    helper = np.array([1.0, 0.0, 0.0]) if abs(n[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = np.cross(n, helper)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(n, e1)
    uv = rng.uniform(-0.5 * plane.extent, 0.5 * plane.extent, size=(n_points, 2))
    # project the centre so points sit exactly on the plane
    foot = np.asarray(plane.center, float) - (n @ np.asarray(plane.center, float) - plane.distance) * n
    pts = foot + uv[:, :1] * e1 + uv[:, 1:] * e2
    if noise_std > 0:
        pts = pts + rng.normal(0.0, noise_std, size=pts.shape)
    perm = rng.permutation(n_points)
    half = n_points // 2
    return pts[perm[:half]], pts[perm[half:]], plane.coefficients


def plane_weights(traces) -> np.ndarray:
    return 1.0 / (np.asarray(traces, dtype=float) + TRACE_EPS)


def _trial(alpha: float, trial_seed, theta: ThetaPrior, extrinsics: RigidTransform,
           n_points: int, noise_std: float, plane: PlanePose, pivot: str):
    cloud_a, cloud_b, x_gt = make_scene(n_points, noise_std, derive_seed(trial_seed, 0), plane)
    prior = theta.with_alpha(alpha)
    noisy = inject(extrinsics, sample_perturbation(prior, derive_seed(trial_seed, 1)), pivot)
    # cloud_b as the second LiDAR measured it, then brought back through the noisy extrinsics
    sensor_b = extrinsics.inverse().apply(cloud_b)
    moved_b = noisy.apply(sensor_b)
    tagged_b = propagate_cloud(extrinsics, sensor_b, prior.effective, pivot)
    z_only = PerturbationPrior(np.zeros((3, 3)), np.zeros((3, 3)), theta.base.Z)
    tagged_a = propagate_cloud(RigidTransform.identity(), cloud_a, z_only, pivot)
    pts = np.vstack([cloud_a, moved_b])
    weights = plane_weights(np.concatenate([tagged_a.traces, tagged_b.traces]))
    xw = fit_plane(pts, weights).x
    xu = fit_plane(pts).x
    return float(np.linalg.norm(x_gt - xw)), float(np.linalg.norm(x_gt - xu))


def fitting_sweep(
    alphas: Sequence[float] = DEFAULT_ALPHAS,
    trials: int = 100,
    rng_seed: Seed = 0,
    *,
    n_points: int = 10000,
    noise_std: float = 0.02,
    plane: PlanePose = SLANTED_PLANE,
    theta: ThetaPrior | None = None,
    extrinsics: RigidTransform | None = None,
    pivot: str = "base",
) -> list[FitReport]:
    """Mean weighted and unweighted coefficient errors per ``alpha``.

    Trial ``k`` uses the same scene and the same standard-normal perturbation
    draw at every ``alpha``. Failed fits are counted and left out of the means.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    theta = theta or default_theta()
    extrinsics = extrinsics or RigidTransform.from_rpy(REFERENCE_RPY_DEG, REFERENCE_TRANSLATION, degrees=True)
    reports = []
    for alpha in alphas:
        ew, eu = [], []
        failures = 0
        for k in range(trials):
            try:
                w, u = _trial(float(alpha), derive_seed(rng_seed, k), theta, extrinsics,
                              n_points, noise_std, plane, pivot)
            except PlaneFitError:
                failures += 1
                continue
            ew.append(w)
            eu.append(u)
        ew_arr, eu_arr = np.array(ew), np.array(eu)
        reports.append(FitReport(
            float(alpha),
            float(ew_arr.mean()) if len(ew_arr) else float("nan"),
            float(eu_arr.mean()) if len(eu_arr) else float("nan"),
            trials,
            failures,
            ew_arr,
            eu_arr,
        ))
    return reports
