"""First-order propagation of extrinsic and measurement noise onto points.

A point ``p`` measured in a LiDAR frame is moved into the base frame through
a noisy extrinsic. The perturbation vector is ``theta = [rho, phi, zeta]``
(translation, rotation, measurement), zero-mean Gaussian with block-diagonal
covariance ``diag(P, Phi, Z)``. To first order ``y ≈ h + H theta`` and the
transformed point has mean ``h`` and covariance ``H Θ Hᵀ``.

Two pivots for the rotation perturbation are supported:

``"base"`` (default)
    The rotation noise turns the whole transformed point about the base
    origin: ``y = exp(phi^) (R p + t) + rho``. Jacobian middle block is
    ``-(R p + t)^``.
``"sensor"``
    The rotation noise turns only the rotation part about the sensor origin:
    ``y = exp(phi^) R p + t + rho``. Jacobian middle block is ``-(R p)^``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .se3 import RigidTransform, skew, skew_batch

PIVOTS = ("base", "sensor")
PSD_TOL = 1e-12


class PriorValidationError(ValueError):
    """Raised for covariance blocks that are not symmetric PSD."""


def _check_block(name: str, m) -> np.ndarray:
    m = np.array(m, dtype=float)
    if m.shape != (3, 3):
        raise PriorValidationError(f"{name} must be 3x3, got {m.shape}")
    if not np.all(np.isfinite(m)):
        raise PriorValidationError(f"{name} has non-finite entries")
    if not np.allclose(m, m.T, atol=PSD_TOL, rtol=1e-9):
        raise PriorValidationError(f"{name} is not symmetric")
    if np.linalg.eigvalsh(0.5 * (m + m.T)).min() < -PSD_TOL:
        raise PriorValidationError(f"{name} is not positive semidefinite")
    m.setflags(write=False)
    return m


@dataclass(frozen=True)
class PerturbationPrior:
    """Covariance blocks for translation (m²), rotation (rad²) and measurement (m²) noise."""

    P: np.ndarray
    Phi: np.ndarray
    Z: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "P", _check_block("P", self.P))
        object.__setattr__(self, "Phi", _check_block("Phi", self.Phi))
        object.__setattr__(self, "Z", _check_block("Z", self.Z))

    @classmethod
    def zero(cls) -> PerturbationPrior:
        z = np.zeros((3, 3))
        return cls(z, z, z)

    @classmethod
    def from_std(cls, translation_std, rotation_std, measurement_std) -> PerturbationPrior:
        """Diagonal prior from per-axis standard deviations."""
        def diag(s):
            return np.diag(np.broadcast_to(np.asarray(s, dtype=float), (3,)) ** 2)

        return cls(diag(translation_std), diag(rotation_std), diag(measurement_std))

    def matrix(self) -> np.ndarray:
        """The full 9x9 covariance ``diag(P, Phi, Z)``."""
        theta = np.zeros((9, 9))
        theta[:3, :3] = self.P
        theta[3:6, 3:6] = self.Phi
        theta[6:, 6:] = self.Z
        return theta

    def scaled(self, alpha: float) -> PerturbationPrior:
        """Scale the extrinsic blocks by ``alpha``; measurement noise unchanged."""
        if alpha < 0:
            raise PriorValidationError("alpha must be non-negative")
        return PerturbationPrior(alpha * self.P, alpha * self.Phi, self.Z)

    def extrinsic_only(self) -> PerturbationPrior:
        return PerturbationPrior(self.P, self.Phi, np.zeros((3, 3)))


@dataclass(frozen=True)
class PointUncertainty:
    mean: np.ndarray
    covariance: np.ndarray
    trace: float


@dataclass
class TaggedPointCloud:
    """Points with their propagated uncertainty.

    ``traces[i]`` is ``tr(Ξ_i)``. Full covariances are kept only on request.
    """

    points: np.ndarray
    traces: np.ndarray
    covariances: Optional[np.ndarray] = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 3)
        self.traces = np.asarray(self.traces, dtype=float).reshape(-1)
        if len(self.points) != len(self.traces):
            raise ValueError("points and traces differ in length")
        if np.any(self.traces < 0):
            raise ValueError("traces must be non-negative")
        if self.covariances is not None:
            self.covariances = np.asarray(self.covariances, dtype=float).reshape(-1, 3, 3)
            if len(self.covariances) != len(self.points):
                raise ValueError("covariances and points differ in length")

    def __len__(self) -> int:
        return len(self.points)

    @classmethod
    def empty(cls) -> TaggedPointCloud:
        return cls(np.zeros((0, 3)), np.zeros(0))

    @classmethod
    def untagged(cls, points) -> TaggedPointCloud:
        points = np.asarray(points, dtype=float).reshape(-1, 3)
        return cls(points, np.zeros(len(points)))

    def subset(self, mask) -> TaggedPointCloud:
        cov = None if self.covariances is None else self.covariances[mask]
        return TaggedPointCloud(self.points[mask], self.traces[mask], cov)

    @staticmethod
    def concatenate(clouds) -> TaggedPointCloud:
        clouds = list(clouds)
        if not clouds:
            return TaggedPointCloud.empty()
        points = np.concatenate([c.points for c in clouds])
        traces = np.concatenate([c.traces for c in clouds])
        cov = None
        if all(c.covariances is not None for c in clouds):
            cov = np.concatenate([c.covariances for c in clouds])
        return TaggedPointCloud(points, traces, cov)


def _check_pivot(pivot: str) -> None:
    if pivot not in PIVOTS:
        raise ValueError(f"pivot must be one of {PIVOTS}, got {pivot!r}")


def propagation_jacobian(t: RigidTransform, p, pivot: str = "base"):
    """Return ``(h, H)``: the transformed mean and the 3x9 Jacobian w.r.t. ``[rho, phi, zeta]``."""
    _check_pivot(pivot)
    p = np.asarray(p, dtype=float).reshape(3)
    rp = t.rotation @ p
    h = rp + t.translation
    lever = h if pivot == "base" else rp
    jac = np.hstack([np.eye(3), -skew(lever), t.rotation])
    return h, jac


def propagate_point(t: RigidTransform, p, prior: PerturbationPrior, pivot: str = "base") -> PointUncertainty:
    if not isinstance(prior, PerturbationPrior):
        raise PriorValidationError("prior must be a PerturbationPrior")
    h, jac = propagation_jacobian(t, p, pivot)
    cov = jac @ prior.matrix() @ jac.T
    cov = 0.5 * (cov + cov.T)
    return PointUncertainty(h, cov, float(np.trace(cov)))


def propagate_cloud(
    t: RigidTransform,
    cloud,
    prior: PerturbationPrior,
    pivot: str = "base",
    keep_covariances: bool = False,
) -> TaggedPointCloud:
    """Vectorized :func:`propagate_point` over an ``(N, 3)`` cloud, order preserved."""
    _check_pivot(pivot)
    if not isinstance(prior, PerturbationPrior):
        raise PriorValidationError("prior must be a PerturbationPrior")
    pts = np.asarray(cloud, dtype=float).reshape(-1, 3)
    if not np.all(np.isfinite(pts)):
        raise ValueError("cloud contains non-finite points")
    if len(pts) == 0:
        cov = np.zeros((0, 3, 3)) if keep_covariances else None
        return TaggedPointCloud(np.zeros((0, 3)), np.zeros(0), cov)
    rp = pts @ t.rotation.T
    h = rp + t.translation
    s = skew_batch(h if pivot == "base" else rp)
    # block-diagonal Θ: Ξ = P + S Φ Sᵀ + R Z Rᵀ
    cov = prior.P[None] + s @ prior.Phi @ s.transpose(0, 2, 1)
    cov = cov + (t.rotation @ prior.Z @ t.rotation.T)[None]
    cov = 0.5 * (cov + cov.transpose(0, 2, 1))
    traces = np.trace(cov, axis1=1, axis2=2)
    return TaggedPointCloud(h, traces, cov if keep_covariances else None)
