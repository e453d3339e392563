"""Image-based servo laws: camera twist and its car-like projection.

Features are the 4 bounding-box corners, ordered as
:meth:`viki.perception.BoundingBox.corners`.  The desired set is rebuilt
every frame from the current box, the measured object depth and the depth
found at the desired placement pixel, so no prior knowledge of the object
size is needed.
"""

from dataclasses import dataclass

import numpy as np

from .camera import CameraIntrinsics, interaction_matrix
from .errors import NonPositiveDepth, SingularCombined
from .geometry import VelocityAdjoint
from .perception import BoundingBox
from .vehicle import Twist2, VehicleParams

PINV_RCOND = 1e-10


@dataclass(frozen=True)
class ServoGains:
    """Positive diagonal gains over the 6D camera twist.

    Five entries are accepted (the published form) and expanded to six by
    duplicating the last rotational gain; six entries are taken as-is.
    """

    lam: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.lam, dtype=float).reshape(-1)
        if lam.size == 5:
            lam = np.append(lam, lam[-1])
        if lam.size != 6:
            raise ValueError(f"expected 5 or 6 gains, got {lam.size}")
        if np.any(lam <= 0):
            raise ValueError("all gains must be positive")
        object.__setattr__(self, "lam", lam)

    def robot_pair(self) -> np.ndarray:
        """Gains for the two reachable body axes (surge, yaw)."""
        return np.array([self.lam[0], self.lam[5]])


@dataclass(frozen=True)
class DesiredPlacement:
    """Where the object's bbox center should sit in the image.

    ``fallback_z`` replaces the depth lookup at the placement pixel when
    that cell is unknown.
    """

    center_u: float
    center_v: float
    fallback_z: float


def current_features(bb: BoundingBox) -> np.ndarray:
    """The detected box corners, in the fixed feature order."""
    return bb.corners()


def desired_features(bb: BoundingBox, Z_o: float, placement: DesiredPlacement,
                     dI_in: np.ndarray) -> np.ndarray:
    """Scale-and-recenter the current box to the placement pixel.

    The desired box keeps the current aspect ratio; its size is the
    current size times k = Z_o / Z_d, where Z_d is the depth image value
    at the placement pixel (falling back to the configured standoff when
    that cell is unknown).
    """
    if Z_o <= 0:
        raise NonPositiveDepth(f"object depth {Z_o} is not positive")
    h, w = dI_in.shape
    pu = min(max(int(placement.center_u), 0), w - 1)
    pv = min(max(int(placement.center_v), 0), h - 1)
    Z_d = float(dI_in[pv, pu])
    if Z_d == 0.0:
        Z_d = placement.fallback_z
    if Z_d <= 0:
        raise NonPositiveDepth(f"desired depth {Z_d} is not positive")
    k = Z_o / Z_d
    half_w = bb.width * k / 2.0
    half_h = bb.height * k / 2.0
    cu, cv = placement.center_u, placement.center_v
    return np.array([
        [cu - half_w, cv - half_h],
        [cu - half_w, cv + half_h],
        [cu + half_w, cv + half_h],
        [cu + half_w, cv - half_h],
    ])


def feature_error(f: np.ndarray, f_d: np.ndarray) -> np.ndarray:
    """Stacked pixel error (f - f_d), interleaved (du0, dv0, du1, ...)."""
    return (np.asarray(f, dtype=float) - np.asarray(f_d, dtype=float)).reshape(-1)


def camera_twist(f: np.ndarray, f_d: np.ndarray, Z_o: float,
                 K: CameraIntrinsics, gains: ServoGains) -> np.ndarray:
    """6D camera velocity decreasing the feature error, least squares."""
    L = interaction_matrix(f, Z_o, K)
    e = feature_error(f, f_d)
    return -gains.lam * (np.linalg.pinv(L, rcond=PINV_RCOND) @ e)


def robot_selection_matrix(theta: float, d: float,
                           mode: str = "body") -> np.ndarray:
    """6x2 map from (nu, omega) to the 6D robot twist.

    ``body`` (default) emits the body twist [nu, 0, 0, 0, 0, omega],
    which is what the camera adjoint expects.  ``literal`` reproduces the
    world-frame Jacobian embedding instead, with the heading-dependent
    2x2 block in the translational rows; it is kept for reproducing the
    published algebra and is exempt from the descent property.
    """
    J = np.zeros((6, 2))
    if mode == "body":
        J[0, 0] = 1.0
        J[5, 1] = 1.0
    elif mode == "literal":
        c, s = np.cos(theta), np.sin(theta)
        J[0, 0], J[0, 1] = c, -d * s
        J[1, 0], J[1, 1] = s, d * c
        J[5, 1] = 1.0
    else:
        raise ValueError(f"unknown selection-matrix mode {mode!r}")
    return J


def robot_velocity_vs(f: np.ndarray, f_d: np.ndarray, Z_o: float,
                      K: CameraIntrinsics, gains: ServoGains,
                      adjoint: VelocityAdjoint, theta: float,
                      params: VehicleParams, jr_mode: str = "body") -> Twist2:
    """Servo law projected onto the two reachable car-like velocities.

    ``adjoint`` must map robot body twists into the active camera frame;
    the caller picks the front or rear camera accordingly.
    """
    L = interaction_matrix(f, Z_o, K)
    J_r = robot_selection_matrix(theta, params.d, jr_mode)
    M = L @ adjoint.matrix @ J_r
    sv = np.linalg.svd(M, compute_uv=False)
    if sv[0] <= 0 or sv[-1] / sv[0] < 1e-12:
        raise SingularCombined("feature-to-robot-velocity map is rank deficient")
    e = feature_error(f, f_d)
    v = -gains.robot_pair() * (np.linalg.pinv(M, rcond=PINV_RCOND) @ e)
    return Twist2(float(v[0]), float(v[1]))
