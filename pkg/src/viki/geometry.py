"""Rigid transforms and the matrix utilities shared by every module.

Conventions: column vectors throughout; 6D twists are ordered
``[vx, vy, vz, wx, wy, wz]`` (linear before angular).  Lengths are meters.
"""

from dataclasses import dataclass, field

import numpy as np

ORTHONORMAL_TOL = 1e-9


@dataclass(frozen=True)
class RigidTransform:
    """SE(3) pose: ``p_out = rotation @ p_in + translation``."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        t = np.asarray(self.translation, dtype=float).reshape(3)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)
        err = np.abs(R @ R.T - np.eye(3)).max()
        if err > ORTHONORMAL_TOL or np.linalg.det(R) < 0:
            raise ValueError("rotation must be orthonormal with det +1")

    @staticmethod
    def identity() -> "RigidTransform":
        return RigidTransform(np.eye(3), np.zeros(3))

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        return RigidTransform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def inverse(self) -> "RigidTransform":
        Rt = self.rotation.T
        return RigidTransform(Rt, -Rt @ self.translation)


@dataclass(frozen=True)
class VelocityAdjoint:
    """6x6 map taking a body twist between rigidly attached frames."""

    matrix: np.ndarray = field(default_factory=lambda: np.eye(6))

    def apply(self, twist: np.ndarray) -> np.ndarray:
        return self.matrix @ np.asarray(twist, dtype=float).reshape(6)


def transform_point(T: RigidTransform, p) -> np.ndarray:
    """Map a 3-point through the transform: R @ p + t."""
    p = np.asarray(p, dtype=float).reshape(3)
    return T.rotation @ p + T.translation


def transform_points(T: RigidTransform, pts: np.ndarray) -> np.ndarray:
    """Vectorized :func:`transform_point` for an (N, 3) array."""
    pts = np.asarray(pts, dtype=float).reshape(-1, 3)
    return pts @ T.rotation.T + T.translation


def skew(t) -> np.ndarray:
    """Cross-product matrix: skew(t) @ v == t x v."""
    tx, ty, tz = np.asarray(t, dtype=float).reshape(3)
    return np.array([
        [0.0, -tz, ty],
        [tz, 0.0, -tx],
        [-ty, tx, 0.0],
    ])


def velocity_adjoint(T: RigidTransform) -> VelocityAdjoint:
    """Twist transform [[R, [t]x R], [0, R]] for the given pose.

    Maps a twist expressed in the transform's source frame into the
    destination frame, with both linear and angular parts re-expressed and
    the lever-arm coupling applied to the linear part.
    """
    R = T.rotation
    top = np.hstack([R, skew(T.translation) @ R])
    bottom = np.hstack([np.zeros((3, 3)), R])
    return VelocityAdjoint(np.vstack([top, bottom]))


def rot_x(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
