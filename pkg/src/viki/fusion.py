"""LiDAR-camera depth fusion.

Point clouds are (N, 3) float arrays in the LiDAR frame (x forward,
y left, z up).  Depth images are (H, W) float arrays in meters with 0
meaning "unknown"; their pixel values are the Euclidean range from the
camera to the surface, which dominates the perpendicular depth and equals
it on the optical axis.  Blind-spot masks are (H, W) uint8 grids in {0, 1}.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .camera import CameraIntrinsics
from .errors import DimensionMismatch
from .geometry import RigidTransform, transform_points

GRID_DTYPE = np.float32


@dataclass(frozen=True)
class RangeImage:
    """LiDAR returns on an (elevation row, azimuth column) grid.

    ``values`` holds ranges in meters with 0 for "no return";
    ``elevations`` and ``azimuths`` give each row/column angle in radians,
    elevations strictly ascending.
    """

    values: np.ndarray
    elevations: np.ndarray
    azimuths: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        elevations = np.asarray(self.elevations, dtype=float).reshape(-1)
        azimuths = np.asarray(self.azimuths, dtype=float).reshape(-1)
        if values.shape != (elevations.size, azimuths.size):
            raise DimensionMismatch(
                f"range grid {values.shape} does not match "
                f"{elevations.size} elevations x {azimuths.size} azimuths")
        if elevations.size >= 2 and np.any(np.diff(elevations) <= 0):
            raise ValueError("elevations must be strictly ascending")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "elevations", elevations)
        object.__setattr__(self, "azimuths", azimuths)


def new_depth_image(K: CameraIntrinsics) -> np.ndarray:
    return np.zeros((K.height, K.width), dtype=GRID_DTYPE)


def project_cloud_to_depth(points: np.ndarray, T_cam_lidar: RigidTransform,
                           K: CameraIntrinsics) -> np.ndarray:
    """Scatter a LiDAR cloud into a camera depth image.

    Points behind the camera or projecting outside the open pixel ranges
    (0, W) x (0, H) are dropped; when several points land on one pixel the
    nearest range wins.
    """
    depth = new_depth_image(K)
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    if points.shape[0] == 0:
        return depth
    cam = transform_points(T_cam_lidar, points)
    Z = cam[:, 2]
    keep = Z > 0
    if not np.any(keep):
        return depth
    cam = cam[keep]
    Z = Z[keep]
    u = K.uc + K.lu * cam[:, 0] / Z
    v = K.vc + K.lv * cam[:, 1] / Z
    inside = (u > 0) & (u < K.width) & (v > 0) & (v < K.height)
    if not np.any(inside):
        return depth
    rng = np.linalg.norm(cam[inside], axis=1)
    flat = (np.floor(v[inside]).astype(np.intp) * K.width
            + np.floor(u[inside]).astype(np.intp))
    # scatter in decreasing range so the nearest write lands last
    order = np.argsort(rng)[::-1]
    depth.reshape(-1)[flat[order]] = rng[order]
    return depth


def interpolate_range_image(ri: RangeImage, target_rows: int = 112) -> RangeImage:
    """Densify a range image to ``target_rows`` virtual elevation layers.

    Each column is interpolated linearly in (elevation, range) between
    consecutive valid returns.  A zero (no-return) neighbor blocks
    interpolation: the virtual cells between it and the next valid row
    stay 0 rather than being extrapolated.
    """
    n = ri.elevations.size
    if n < 2:
        raise ValueError("need at least 2 rows to interpolate")
    el_t = np.linspace(ri.elevations[0], ri.elevations[-1], target_rows)
    idx = np.searchsorted(ri.elevations, el_t, side="right") - 1
    idx = np.clip(idx, 0, n - 2)
    lo = ri.values[idx, :]
    hi = ri.values[idx + 1, :]
    t = (el_t - ri.elevations[idx]) / (ri.elevations[idx + 1] - ri.elevations[idx])
    t = t[:, None]
    out = np.where((lo > 0) & (hi > 0), (1.0 - t) * lo + t * hi, 0.0)
    exact_lo = (t == 0.0).reshape(-1)
    if np.any(exact_lo):
        out[exact_lo] = np.where(lo[exact_lo] > 0, lo[exact_lo], 0.0)
    exact_hi = (t == 1.0).reshape(-1)
    if np.any(exact_hi):
        out[exact_hi] = np.where(hi[exact_hi] > 0, hi[exact_hi], 0.0)
    return RangeImage(out, el_t, ri.azimuths)


def range_to_cloud(ri: RangeImage) -> np.ndarray:
    """Spherical-to-Cartesian conversion of every valid cell (x forward)."""
    rows, cols = np.nonzero(ri.values > 0)
    if rows.size == 0:
        return np.zeros((0, 3))
    r = ri.values[rows, cols]
    cos_el = np.cos(ri.elevations)
    sin_el = np.sin(ri.elevations)
    cos_az = np.cos(ri.azimuths)
    sin_az = np.sin(ri.azimuths)
    ce = cos_el[rows]
    return np.column_stack([
        r * ce * cos_az[cols],
        r * ce * sin_az[cols],
        r * sin_el[rows],
    ])


def cloud_to_range(points: np.ndarray, elevations: np.ndarray,
                   azimuths: np.ndarray) -> RangeImage:
    """Bin a cloud onto an (elevation, azimuth) grid, nearest range wins.

    Points falling outside the grid by more than half a cell are dropped.
    """
    elevations = np.asarray(elevations, dtype=float).reshape(-1)
    azimuths = np.asarray(azimuths, dtype=float).reshape(-1)
    values = np.zeros((elevations.size, azimuths.size))
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    if points.shape[0] == 0:
        return RangeImage(values, elevations, azimuths)
    r = np.linalg.norm(points, axis=1)
    ok = r > 0
    points, r = points[ok], r[ok]
    el = np.arcsin(np.clip(points[:, 2] / r, -1.0, 1.0))
    az = np.arctan2(points[:, 1], points[:, 0])
    row = _nearest_bin(el, elevations)
    col = _nearest_bin(az, azimuths)
    ok = (row >= 0) & (col >= 0)
    flat = row[ok] * azimuths.size + col[ok]
    rr = r[ok]
    order = np.lexsort((rr, flat))
    flat, rr = flat[order], rr[order]
    first = np.ones(flat.size, dtype=bool)
    first[1:] = flat[1:] != flat[:-1]
    values.reshape(-1)[flat[first]] = rr[first]
    return RangeImage(values, elevations, azimuths)


def _nearest_bin(x: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Nearest index on an ascending grid, -1 when off-grid by > half step."""
    if grid.size == 1:
        step = np.inf
        idx = np.zeros(x.size, dtype=np.intp)
    else:
        step = np.diff(grid).max()
        idx = np.clip(np.searchsorted(grid, x), 1, grid.size - 1)
        idx = np.where(np.abs(x - grid[idx - 1]) <= np.abs(x - grid[idx]),
                       idx - 1, idx)
    off = np.abs(x - grid[idx]) > 0.5 * step + 1e-12
    return np.where(off, -1, idx)


def blind_spot_mask(K: CameraIntrinsics, T_cam_lidar: RigidTransform,
                    radius: float = 4.1052, ground_z: float = -1.10,
                    step: float = 0.001, bound: float = 4.11,
                    chunk: int = 256) -> np.ndarray:
    """Rasterize the ground disk the LiDAR cannot observe into the image.

    Ground points (X, Y, ground_z) in the LiDAR frame are sampled on a
    [-bound, bound]^2 grid at ``step``, kept where X^2 + Y^2 <= radius^2,
    and projected with the same rule as :func:`project_cloud_to_depth`;
    hit pixels are 1.  The sample order does not affect the result.
    """
    if step <= 0:
        raise ValueError("sampling step must be positive")
    mask = np.zeros((K.height, K.width), dtype=np.uint8)
    if radius <= 0:
        return mask
    n = int(round(2.0 * bound / step)) + 1
    xs = np.linspace(-bound, bound, n)
    M = np.empty((3, 4))
    M[:, :3] = T_cam_lidar.rotation
    M[:, 3] = T_cam_lidar.translation
    r2 = radius * radius
    flat = mask.reshape(-1)
    for start in range(0, n, chunk):
        x = xs[start:start + chunk]
        X, Y = np.meshgrid(x, xs, indexing="ij")
        X = X.reshape(-1)
        Y = Y.reshape(-1)
        keep = X * X + Y * Y <= r2
        if not np.any(keep):
            continue
        X, Y = X[keep], Y[keep]
        cx = M[0, 0] * X + M[0, 1] * Y + M[0, 2] * ground_z + M[0, 3]
        cy = M[1, 0] * X + M[1, 1] * Y + M[1, 2] * ground_z + M[1, 3]
        cz = M[2, 0] * X + M[2, 1] * Y + M[2, 2] * ground_z + M[2, 3]
        front = cz > 0
        if not np.any(front):
            continue
        cx, cy, cz = cx[front], cy[front], cz[front]
        u = K.uc + K.lu * cx / cz
        v = K.vc + K.lv * cy / cz
        inside = (u > 0) & (u < K.width) & (v > 0) & (v < K.height)
        if not np.any(inside):
            continue
        idx = (np.floor(v[inside]).astype(np.intp) * K.width
               + np.floor(u[inside]).astype(np.intp))
        flat[idx] = 1
    return mask


def fuse_depth(dI_l: np.ndarray, dI_c1: np.ndarray, M: np.ndarray) -> np.ndarray:
    """Fill the LiDAR blind spot with camera depth.

    Inside the mask the LiDAR cells are zeroed before the masked camera
    image is added, so every output pixel comes from exactly one source:
    the camera where M == 1, the LiDAR elsewhere.
    """
    if dI_l.shape != dI_c1.shape or dI_l.shape != M.shape:
        raise DimensionMismatch(
            f"shapes differ: lidar {dI_l.shape}, camera {dI_c1.shape}, "
            f"mask {M.shape}")
    cond = M if M.dtype == np.bool_ else M != 0
    return np.where(cond, dI_c1, dI_l)


def select_depth_source(mode: str, dfI: np.ndarray,
                        dI_c2: np.ndarray) -> np.ndarray:
    """Pick the depth image feeding the servo pipeline.

    ``forward`` positioning uses the LiDAR + front-camera fusion,
    ``backward`` the rear-camera depth channel.
    """
    if mode == "forward":
        return dfI
    if mode == "backward":
        return dI_c2
    raise ValueError(f"unknown depth-source mode {mode!r}")


def load_point_cloud(path) -> np.ndarray:
    """Read a plain-text cloud, one "x y z" triple (meters) per line."""
    rows = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ValueError(f"bad point line: {line!r}")
        rows.append([float(p) for p in parts])
    return np.array(rows, dtype=float).reshape(-1, 3)


def save_point_cloud(path, points: np.ndarray) -> None:
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    lines = [f"{x:.9g} {y:.9g} {z:.9g}" for x, y, z in points]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def write_depth_pgm(path, depth: np.ndarray) -> None:
    """Write a depth image as 16-bit binary PGM in millimeters (0 unknown)."""
    depth = np.asarray(depth, dtype=float)
    mm = np.clip(np.rint(depth * 1000.0), 0, 65535).astype(">u2")
    h, w = depth.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n65535\n".encode("ascii"))
        f.write(mm.tobytes())


def read_depth_pgm(path) -> np.ndarray:
    """Read a depth image written by :func:`write_depth_pgm` (meters)."""
    with open(path, "rb") as f:
        data = f.read()
    header, _, rest = data.partition(b"65535\n")
    fields = header.split()
    if len(fields) != 3 or fields[0] != b"P5":
        raise ValueError("not a 16-bit PGM depth file")
    w, h = int(fields[1]), int(fields[2])
    expected = w * h * 2
    if len(rest) != expected:
        raise ValueError(f"PGM payload of {len(rest)} bytes, expected {expected}")
    mm = np.frombuffer(rest, dtype=">u2").reshape(h, w)
    return (mm.astype(GRID_DTYPE)) / 1000.0
