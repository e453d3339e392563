"""Analytic world for the closed-loop simulator.

The scene is a ground plane at world z = 0 plus one axis-aligned box
resting on it.  Sensors are synthesized by ray casting against those two
surfaces in closed form, so every fusion and perception path sees
physically consistent ranges without a mesh or a renderer.
"""

from dataclasses import dataclass

import numpy as np

from .camera import CameraIntrinsics
from .fusion import GRID_DTYPE, RangeImage
from .geometry import RigidTransform


@dataclass(frozen=True)
class BoxWorld:
    """Ground plane plus one axis-aligned box (center, full extents)."""

    box_center: np.ndarray
    box_extents: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "box_center",
                           np.asarray(self.box_center, dtype=float).reshape(3))
        object.__setattr__(self, "box_extents",
                           np.asarray(self.box_extents, dtype=float).reshape(3))

    def box_corners(self) -> np.ndarray:
        half = self.box_extents / 2.0
        signs = np.array([[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1)
                          for sz in (-1, 1)], dtype=float)
        return self.box_center + signs * half

    def cast_rays(self, origin, dirs: np.ndarray,
                  max_range: float) -> np.ndarray:
        """Range to the first surface along each unit direction (0 = none).

        Rays starting inside the box get no box hit; upward rays get no
        ground hit.
        """
        dirs = np.asarray(dirs)
        if dirs.dtype not in (np.float32, np.float64):
            dirs = dirs.astype(np.float64)
        dirs = dirs.reshape(-1, 3)
        dt = dirs.dtype
        origin = np.asarray(origin, dtype=dt).reshape(3)
        eps = dt.type(1e-7 if dt == np.float32 else 1e-9)
        big = dt.type(np.finfo(dt).max / 4)

        # sign-preserving floor on the components keeps the slab division
        # finite; near-parallel rays behave as extreme-slope ones
        d_safe = np.where(np.abs(dirs) < eps,
                          np.where(dirs < 0, -eps, eps), dirs)

        t_ground = -origin[2] / d_safe[:, 2]
        t_ground = np.where((dirs[:, 2] < -eps) & (t_ground > eps),
                            t_ground, big)

        bmin = (self.box_center - self.box_extents / 2.0).astype(dt)
        bmax = (self.box_center + self.box_extents / 2.0).astype(dt)
        inv = 1.0 / d_safe
        t0 = (bmin - origin) * inv
        t1 = (bmax - origin) * inv
        near = np.minimum(t0, t1).max(axis=1)
        far = np.maximum(t0, t1).min(axis=1)
        # rays born inside the box (near <= 0) are treated as seeing nothing
        t_box = np.where((near <= far) & (near > eps), near, big)

        t = np.minimum(t_ground, t_box)
        return np.where(t <= max_range, t, dt.type(0.0))


_BEAM_DIR_CACHE: dict = {}


def _beam_directions(el: np.ndarray, az: np.ndarray) -> np.ndarray:
    key = (el.tobytes(), az.tobytes())
    dirs = _BEAM_DIR_CACHE.get(key)
    if dirs is None:
        E, A = np.meshgrid(el, az, indexing="ij")
        ce = np.cos(E).reshape(-1)
        dirs = np.column_stack([
            ce * np.cos(A).reshape(-1),
            ce * np.sin(A).reshape(-1),
            np.sin(E).reshape(-1),
        ])
        _BEAM_DIR_CACHE[key] = dirs
    return dirs


def lidar_range_image(world: BoxWorld, T_world_lidar: RigidTransform,
                      elevations: np.ndarray, azimuths: np.ndarray,
                      max_range: float) -> RangeImage:
    """Spin the beam grid against the world from the LiDAR pose."""
    el = np.asarray(elevations, dtype=float)
    az = np.asarray(azimuths, dtype=float)
    dirs_world = _beam_directions(el, az) @ T_world_lidar.rotation.T
    ranges = world.cast_rays(T_world_lidar.translation, dirs_world, max_range)
    return RangeImage(ranges.reshape(el.size, az.size), el, az)


_PIXEL_DIR_CACHE: dict = {}


def _pixel_directions(K: CameraIntrinsics) -> np.ndarray:
    """Unit camera-frame ray through each pixel center, cached per camera."""
    key = (K.lu, K.lv, K.uc, K.vc, K.width, K.height)
    dirs = _PIXEL_DIR_CACHE.get(key)
    if dirs is None:
        us = (np.arange(K.width) + 0.5 - K.uc) / K.lu
        vs = (np.arange(K.height) + 0.5 - K.vc) / K.lv
        U, V = np.meshgrid(us, vs)
        dirs = np.empty((K.height, K.width, 3), dtype=np.float64)
        dirs[..., 0] = U
        dirs[..., 1] = V
        dirs[..., 2] = 1.0
        dirs /= np.linalg.norm(dirs, axis=2, keepdims=True)
        dirs = dirs.astype(np.float32)
        _PIXEL_DIR_CACHE[key] = dirs
    return dirs


def camera_depth_regions(world: BoxWorld, T_world_cam: RigidTransform,
                         K: CameraIntrinsics, regions,
                         max_range: float) -> np.ndarray:
    """Depth image filled only over the requested pixel rectangles.

    ``regions`` is an iterable of (u0, v0, u1, v1) integer rects,
    inclusive of u0/v0 and exclusive of u1/v1.  Values are the Euclidean
    range from the camera through each pixel center; cells outside every
    region, beyond ``max_range``, or hitting nothing stay 0.
    """
    depth = np.zeros((K.height, K.width), dtype=GRID_DTYPE)
    all_dirs = _pixel_directions(K)
    for u0, v0, u1, v1 in regions:
        u0 = max(0, int(u0))
        v0 = max(0, int(v0))
        u1 = min(K.width, int(u1))
        v1 = min(K.height, int(v1))
        if u1 <= u0 or v1 <= v0:
            continue
        dirs_cam = all_dirs[v0:v1, u0:u1].reshape(-1, 3)
        dirs_world = dirs_cam @ T_world_cam.rotation.T.astype(np.float32)
        ranges = world.cast_rays(T_world_cam.translation, dirs_world, max_range)
        # overlapping regions see the same world, so plain assignment is safe
        depth[v0:v1, u0:u1] = ranges.reshape(v1 - v0, u1 - u0).astype(GRID_DTYPE)
    return depth
