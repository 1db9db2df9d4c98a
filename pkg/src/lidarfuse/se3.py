"""Rigid-motion algebra used by the propagation and fusion code.

Rotations are plain 3x3 numpy arrays. A :class:`RigidTransform` maps points
from a source frame into a target frame as ``y = R @ p + t``.

Euler angles follow the roll-pitch-yaw convention ``R = Rz(yaw) Ry(pitch)
Rx(roll)``: roll about the fixed x axis is applied first, then pitch about
the fixed y axis, then yaw about the fixed z axis.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SMALL_ANGLE = 1e-8
ORTHO_TOL = 1e-9


def skew(v) -> np.ndarray:
    """Return the 3x3 antisymmetric matrix ``v^`` with ``skew(v) @ w == cross(v, w)``."""
    x, y, z = np.asarray(v, dtype=float).reshape(3)
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def skew_batch(v: np.ndarray) -> np.ndarray:
    """Vectorized :func:`skew` over an ``(N, 3)`` array, giving ``(N, 3, 3)``."""
    v = np.asarray(v, dtype=float).reshape(-1, 3)
    out = np.zeros((v.shape[0], 3, 3))
    out[:, 0, 1] = -v[:, 2]
    out[:, 0, 2] = v[:, 1]
    out[:, 1, 0] = v[:, 2]
    out[:, 1, 2] = -v[:, 0]
    out[:, 2, 0] = -v[:, 1]
    out[:, 2, 1] = v[:, 0]
    return out


def _exp_coefficients(theta: np.ndarray):
    # sin(t)/t and (1 - cos(t))/t^2 with Taylor fallback near zero
    small = theta < SMALL_ANGLE
    safe = np.where(small, 1.0, theta)
    a = np.where(small, 1.0 - theta**2 / 6.0, np.sin(safe) / safe)
    b = np.where(small, 0.5 - theta**2 / 24.0, (1.0 - np.cos(safe)) / safe**2)
    return a, b


def so3_exp(phi) -> np.ndarray:
    """Rodrigues formula: rotation matrix for the rotation vector ``phi``.

    Accepts a single 3-vector or an ``(N, 3)`` batch.
    """
    phi = np.asarray(phi, dtype=float)
    single = phi.ndim == 1
    phis = phi.reshape(-1, 3)
    theta = np.linalg.norm(phis, axis=1)
    a, b = _exp_coefficients(theta)
    k = skew_batch(phis)
    k2 = k @ k
    out = np.eye(3)[None] + a[:, None, None] * k + b[:, None, None] * k2
    return out[0] if single else out


def so3_log(r) -> np.ndarray:
    """Rotation vector of a rotation matrix (inverse of :func:`so3_exp` for angles < pi)."""
    r = np.asarray(r, dtype=float)
    cos_t = np.clip((np.trace(r) - 1.0) / 2.0, -1.0, 1.0)
    theta = np.arccos(cos_t)
    w = np.array([r[2, 1] - r[1, 2], r[0, 2] - r[2, 0], r[1, 0] - r[0, 1]])
    if theta < SMALL_ANGLE:
        return 0.5 * w
    if np.pi - theta < 1e-6:
        # near pi the antisymmetric part vanishes; recover the axis from R + I
        m = (r + np.eye(3)) / 2.0
        axis = m[np.argmax(np.diag(m))]
        axis = axis / np.linalg.norm(axis)
        return theta * axis
    return theta / (2.0 * np.sin(theta)) * w


def rot_x(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rotation_from_rpy(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """``Rz(yaw) @ Ry(pitch) @ Rx(roll)``; angles in radians."""
    return rot_z(yaw) @ rot_y(pitch) @ rot_x(roll)


def rpy_from_rotation(r) -> np.ndarray:
    """Inverse of :func:`rotation_from_rpy` away from pitch = +-90 deg."""
    r = np.asarray(r, dtype=float)
    pitch = np.arcsin(np.clip(-r[2, 0], -1.0, 1.0))
    roll = np.arctan2(r[2, 1], r[2, 2])
    yaw = np.arctan2(r[1, 0], r[0, 0])
    return np.array([roll, pitch, yaw])


def is_rotation(r, tol: float = ORTHO_TOL) -> bool:
    r = np.asarray(r, dtype=float)
    if r.shape != (3, 3) or not np.all(np.isfinite(r)):
        return False
    return bool(
        np.allclose(r.T @ r, np.eye(3), atol=tol, rtol=0.0)
        and abs(np.linalg.det(r) - 1.0) <= tol
    )


@dataclass(frozen=True)
class RigidTransform:
    """Rotation plus translation, ``y = rotation @ p + translation``."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        r = np.array(self.rotation, dtype=float)
        t = np.array(self.translation, dtype=float).reshape(3)
        if not is_rotation(r):
            raise ValueError("rotation is not orthonormal with det +1")
        if not np.all(np.isfinite(t)):
            raise ValueError("translation must be finite")
        r.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> RigidTransform:
        return cls()

    @classmethod
    def from_rpy(cls, rpy, translation=(0.0, 0.0, 0.0), degrees: bool = False) -> RigidTransform:
        rpy = np.asarray(rpy, dtype=float)
        if degrees:
            rpy = np.deg2rad(rpy)
        return cls(rotation_from_rpy(*rpy), translation)

    @classmethod
    def from_yaw(cls, yaw: float, translation=(0.0, 0.0, 0.0)) -> RigidTransform:
        return cls(rot_z(yaw), translation)

    def apply(self, p) -> np.ndarray:
        """Transform a point or an ``(N, 3)`` array of points."""
        p = np.asarray(p, dtype=float)
        return p @ self.rotation.T + self.translation

    def compose(self, other: RigidTransform) -> RigidTransform:
        """``self ∘ other``: apply ``other`` first."""
        return RigidTransform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def inverse(self) -> RigidTransform:
        rt = self.rotation.T
        return RigidTransform(rt, -rt @ self.translation)

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def yaw(self) -> float:
        return float(np.arctan2(self.rotation[1, 0], self.rotation[0, 0]))

    def is_yaw_only(self, tol: float = 1e-6) -> bool:
        return bool(np.allclose(self.rotation, rot_z(self.yaw()), atol=tol, rtol=0.0))


def compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    return a.compose(b)


def apply(t: RigidTransform, p) -> np.ndarray:
    return t.apply(p)


def inverse(t: RigidTransform) -> RigidTransform:
    return t.inverse()
