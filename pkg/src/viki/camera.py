"""Pinhole camera model and the visual-servoing interaction matrix.

Camera frame: x right, y down, z along the optical axis.  Feature points
handed to the interaction matrix are expressed relative to the principal
point, i.e. ``(u - u_c, v - v_c)``; the finite-difference test against the
projection model is the arbiter for that convention.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import BehindCamera, DegenerateFeatures, NonPositiveDepth

# Above this squared spectral condition number of the stacked matrix the
# feature geometry is treated as degenerate.
DEGENERACY_COND = 1e12


@dataclass(frozen=True)
class CameraIntrinsics:
    lu: float            # focal length along u, px
    lv: float            # focal length along v, px
    uc: float            # optical center u, px
    vc: float            # optical center v, px
    width: int = 1280
    height: int = 720

    def __post_init__(self):
        if self.lu <= 0 or self.lv <= 0:
            raise ValueError("focal lengths must be positive")
        if self.lu != self.lv:
            warnings.warn(
                "non-square pixels: interaction matrix is evaluated with "
                "l = lu; results are only supported for lu == lv",
                stacklevel=2,
            )


def project(point, K: CameraIntrinsics) -> np.ndarray:
    """Project a camera-frame 3D point to continuous pixel coordinates."""
    X, Y, Z = np.asarray(point, dtype=float).reshape(3)
    if Z <= 0:
        raise BehindCamera(f"point depth {Z} is not positive")
    return np.array([K.uc + K.lu * X / Z, K.vc + K.lv * Y / Z])


def project_points(points: np.ndarray, K: CameraIntrinsics):
    """Vectorized projection of an (N, 3) array.

    Returns (pixels, in_front) where rows of ``pixels`` with
    ``in_front == False`` are undefined instead of raising.
    """
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    Z = points[:, 2]
    in_front = Z > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        u = K.uc + K.lu * points[:, 0] / Z
        v = K.vc + K.lv * points[:, 1] / Z
    return np.column_stack([u, v]), in_front


def back_project(pixel, Z: float, K: CameraIntrinsics) -> np.ndarray:
    """Invert :func:`project` for a known depth."""
    if Z <= 0:
        raise NonPositiveDepth(f"depth {Z} is not positive")
    u, v = np.asarray(pixel, dtype=float).reshape(2)
    return np.array([(u - K.uc) * Z / K.lu, (v - K.vc) * Z / K.lv, Z])


def interaction_row(f_centered, Z: float, l: float) -> np.ndarray:
    """2x6 image Jacobian block for one feature point.

    ``f_centered`` is the pixel position relative to the principal point
    and ``l`` the focal length in pixels.  Rows map the 6D camera twist
    [vx, vy, vz, wx, wy, wz] to the feature's pixel velocity (du, dv).
    """
    if Z <= 0:
        raise NonPositiveDepth(f"feature depth {Z} is not positive")
    u0, v0 = np.asarray(f_centered, dtype=float).reshape(2)
    return np.array([
        [-l / Z, 0.0, u0 / Z, u0 * v0 / l, -(l + u0 * u0 / l), v0],
        [0.0, -l / Z, v0 / Z, l + v0 * v0 / l, -u0 * v0 / l, -u0],
    ])


def interaction_matrix(features: np.ndarray, Z_o: float,
                       K: CameraIntrinsics) -> np.ndarray:
    """Stack interaction rows for n >= 3 features sharing one depth.

    ``features`` is an (n, 2) array of raw pixel coordinates; they are
    re-expressed about the principal point before evaluating each block.
    Raises DegenerateFeatures when the stacked matrix is effectively
    rank deficient (coincident or collinear points).
    """
    features = np.asarray(features, dtype=float).reshape(-1, 2)
    n = features.shape[0]
    if n < 3:
        raise DegenerateFeatures(f"need at least 3 features, got {n}")
    centered = features - np.array([K.uc, K.vc])
    L = np.vstack([interaction_row(f, Z_o, K.lu) for f in centered])
    sv = np.linalg.svd(L, compute_uv=False)
    if sv[-1] <= 0 or (sv[0] / sv[-1]) ** 2 > DEGENERACY_COND:
        raise DegenerateFeatures("feature geometry is rank deficient")
    return L
