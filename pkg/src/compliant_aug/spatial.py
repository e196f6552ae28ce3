"""Rotation matrices, rigid transforms and wrenches.

Rotations are plain 3x3 numpy arrays; quaternions only appear at file
boundaries (see :func:`quat_to_rot` / :func:`rot_to_quat`).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Principal-branch guard for the log map.
LOG_ANGLE_MARGIN = 1e-6


class SingularityError(ValueError):
    """Rotation angle too close to pi for a well-defined log map."""


def _vec3(v, name="vector") -> np.ndarray:
    a = np.asarray(v, dtype=float).reshape(-1)
    if a.shape != (3,):
        raise ValueError(f"{name} must have 3 components, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} must be finite, got {a}")
    return a


def skew(v) -> np.ndarray:
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def rot_exp(v) -> np.ndarray:
    """Rotation matrix exp([v]x) via Rodrigues' formula."""
    v = _vec3(v, "axis-angle")
    theta = float(np.linalg.norm(v))
    if theta < 1e-12:
        return np.eye(3)
    K = skew(v / theta)
    return np.eye(3) + np.sin(theta) * K + (1.0 - np.cos(theta)) * (K @ K)


def rot_log(R) -> np.ndarray:
    """Axis-angle vector of ``R`` on the principal branch.

    Raises :class:`SingularityError` when the angle is within
    ``LOG_ANGLE_MARGIN`` of pi.
    """
    R = np.asarray(R, dtype=float)
    cos_theta = np.clip((np.trace(R) - 1.0) / 2.0, -1.0, 1.0)
    theta = float(np.arccos(cos_theta))
    if theta > np.pi - LOG_ANGLE_MARGIN:
        raise SingularityError(f"rotation angle {theta:.9f} rad is at the log-map singularity")
    w = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    if theta < 1e-6:
        # sin(theta)/theta ~ 1 - theta^2/6
        return 0.5 * w * (1.0 + theta * theta / 6.0)
    return theta / (2.0 * np.sin(theta)) * w


def rot_log_batch(Rs) -> np.ndarray:
    """Vectorized :func:`rot_log` over a stack of rotations (k, 3, 3)."""
    Rs = np.asarray(Rs, dtype=float)
    cos_theta = np.clip((np.trace(Rs, axis1=1, axis2=2) - 1.0) / 2.0, -1.0, 1.0)
    theta = np.arccos(cos_theta)
    if np.any(theta > np.pi - LOG_ANGLE_MARGIN):
        raise SingularityError(f"rotation angle {theta.max():.9f} rad is at the log-map singularity")
    w = np.stack([Rs[:, 2, 1] - Rs[:, 1, 2], Rs[:, 0, 2] - Rs[:, 2, 0], Rs[:, 1, 0] - Rs[:, 0, 1]], axis=1)
    small = theta < 1e-6
    sin = np.where(small, 1.0, np.sin(theta))
    factor = np.where(small, 0.5 * (1.0 + theta * theta / 6.0), theta / (2.0 * sin))
    return factor[:, None] * w


def is_rotation(R, tol: float = 1e-9) -> bool:
    R = np.asarray(R, dtype=float)
    return (
        R.shape == (3, 3)
        and bool(np.all(np.isfinite(R)))
        and np.allclose(R @ R.T, np.eye(3), atol=tol, rtol=0.0)
        and abs(np.linalg.det(R) - 1.0) <= tol
    )


def quat_to_rot(q, tol: float = 1e-6) -> np.ndarray:
    """(w, x, y, z) quaternion to matrix; the quaternion must be unit to ``tol``."""
    q = np.asarray(q, dtype=float)
    n = float(np.linalg.norm(q))
    if not np.isfinite(n) or abs(n - 1.0) > tol:
        raise ValueError(f"quaternion norm {n} deviates from 1 by more than {tol}")
    w, x, y, z = q / n
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def rot_to_quat(R) -> np.ndarray:
    """Matrix to (w, x, y, z) quaternion with w >= 0."""
    R = np.asarray(R, dtype=float)
    tr = np.trace(R)
    if tr > 0:
        s = 2.0 * np.sqrt(tr + 1.0)
        q = [0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s]
    elif R[0, 0] > R[1, 1] and R[0, 0] > R[2, 2]:
        s = 2.0 * np.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2])
        q = [(R[2, 1] - R[1, 2]) / s, 0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s]
    elif R[1, 1] > R[2, 2]:
        s = 2.0 * np.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2])
        q = [(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s]
    else:
        s = 2.0 * np.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1])
        q = [(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s]
    q = np.array(q)
    q /= np.linalg.norm(q)
    return q if q[0] >= 0 else -q


@dataclass(frozen=True)
class RigidTransform:
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        R = np.array(self.rotation, dtype=float)
        p = np.array(_vec3(self.translation, "translation"))
        if not is_rotation(R, tol=1e-8):
            raise ValueError("rotation is not orthonormal with det +1")
        R.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", p)

    @classmethod
    def trusted(cls, rotation: np.ndarray, translation: np.ndarray) -> "RigidTransform":
        """Skip validation; for hot loops whose inputs are rotations by construction."""
        obj = object.__new__(cls)
        R = np.array(rotation, dtype=float)
        p = np.array(translation, dtype=float)
        R.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(obj, "rotation", R)
        object.__setattr__(obj, "translation", p)
        return obj

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls()

    @classmethod
    def from_translation(cls, p) -> "RigidTransform":
        return cls(np.eye(3), p)

    def as_matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.rotation
        T[:3, 3] = self.translation
        return T

    def apply(self, point) -> np.ndarray:
        return self.rotation @ np.asarray(point, dtype=float) + self.translation

    def __matmul__(self, other: "RigidTransform") -> "RigidTransform":
        return compose(self, other)


def compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    """a * b: apply ``b`` first, then ``a``."""
    return RigidTransform(a.rotation @ b.rotation, a.rotation @ b.translation + a.translation)


def inverse(a: RigidTransform) -> RigidTransform:
    Rt = a.rotation.T
    return RigidTransform(Rt, -Rt @ a.translation)


@dataclass(frozen=True)
class Wrench:
    """Force (N) and torque (N m), both in the world frame."""

    force: np.ndarray = field(default_factory=lambda: np.zeros(3))
    torque: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        f = np.array(_vec3(self.force, "force"))
        t = np.array(_vec3(self.torque, "torque"))
        f.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "force", f)
        object.__setattr__(self, "torque", t)

    @classmethod
    def zero(cls) -> "Wrench":
        return cls()

    def scaled(self, s: float) -> "Wrench":
        return Wrench(self.force * s, self.torque * s)

    def is_zero(self) -> bool:
        return not (np.any(self.force) or np.any(self.torque))
