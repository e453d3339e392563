import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from viki.camera import CameraIntrinsics
from viki.errors import DimensionMismatch
from viki.fusion import (
    RangeImage, blind_spot_mask, cloud_to_range, fuse_depth,
    interpolate_range_image, load_point_cloud, project_cloud_to_depth,
    range_to_cloud, read_depth_pgm, save_point_cloud, select_depth_source,
    write_depth_pgm,
)
from viki.geometry import RigidTransform, rot_y

IDENT = RigidTransform.identity()


def small_K(w=64, h=48, f=40.0):
    return CameraIntrinsics(lu=f, lv=f, uc=w / 2, vc=h / 2, width=w, height=h)


# ---------------------------------------------------------------- projection

def test_project_empty_cloud(K):
    depth = project_cloud_to_depth(np.zeros((0, 3)), IDENT, K)
    assert depth.shape == (720, 1280)
    assert not depth.any()


def test_project_axis_point(K):
    depth = project_cloud_to_depth(np.array([[0, 0, 3.0]]), IDENT, K)
    assert depth[360, 640] == 3.0
    assert np.count_nonzero(depth) == 1


def test_project_nearest_wins_any_order(K):
    # brute force over insertion orders: the nearer range must win
    pts = np.array([[0, 0, 2.0], [0, 0, 5.0]])
    for order in ([0, 1], [1, 0]):
        depth = project_cloud_to_depth(pts[order], IDENT, K)
        assert depth[360, 640] == 2.0


def test_project_drops_out_of_frame_and_behind(K):
    pts = np.array([
        [0, 0, -1.0],     # behind
        [100.0, 0, 1.0],  # far outside
        [0, 0, 4.0],      # visible
    ])
    depth = project_cloud_to_depth(pts, IDENT, K)
    assert np.count_nonzero(depth) == 1
    assert depth[360, 640] == 4.0


def test_project_range_at_least_depth(K, rng):
    # pixel stores camera-frame range, which bounds perpendicular depth
    T = RigidTransform(rot_y(0.2), [0.1, -0.05, 0.3])
    pts = rng.uniform(-2, 2, (500, 3)) + [0, 0, 5.0]
    depth = project_cloud_to_depth(pts, T, K)
    cam = pts @ T.rotation.T + T.translation
    zmin = cam[:, 2].min()
    nz = depth[depth > 0]
    assert np.all(nz >= zmin - 1e-6)


def test_project_on_axis_equality(K):
    depth = project_cloud_to_depth(np.array([[0.0, 0.0, 2.5]]), IDENT, K)
    assert depth[360, 640] == pytest.approx(2.5, abs=1e-7)


def test_project_matches_per_pixel_oracle(K, rng):
    # independent scatter: resolve each pixel's winner by explicit min-range,
    # and check the stored range dominates the winner's perpendicular depth
    T = RigidTransform(rot_y(-0.15), [0.05, -0.1, 0.2])
    pts = rng.uniform(-1.5, 1.5, (800, 3)) + [0, 0, 4.0]
    depth = project_cloud_to_depth(pts, T, K)
    cam = pts @ T.rotation.T + T.translation
    winners = {}
    for p in cam:
        if p[2] <= 0:
            continue
        u = K.uc + K.lu * p[0] / p[2]
        v = K.vc + K.lv * p[1] / p[2]
        if not (0 < u < K.width and 0 < v < K.height):
            continue
        key = (int(np.floor(v)), int(np.floor(u)))
        rng_p = float(np.linalg.norm(p))
        if key not in winners or rng_p < winners[key][0]:
            winners[key] = (rng_p, float(p[2]))
    assert np.count_nonzero(depth) == len(winners)
    for (vv, uu), (rng_p, z) in winners.items():
        assert depth[vv, uu] == pytest.approx(rng_p, rel=1e-6)
        assert depth[vv, uu] >= z - 1e-6


# ------------------------------------------------------------- interpolation

def ri_from_columns(cols, elevations):
    return RangeImage(np.asarray(cols, dtype=float), elevations,
                      np.zeros(np.asarray(cols).shape[1]))


def test_interpolate_linear_midpoint():
    ri = ri_from_columns([[1.0], [3.0]], [-0.1, 0.1])
    out = interpolate_range_image(ri, target_rows=3)
    assert out.values[:, 0] == pytest.approx([1.0, 2.0, 3.0])


def test_interpolate_blocks_on_invalid_neighbor():
    ri = ri_from_columns([[1.0], [0.0]], [-0.1, 0.1])
    out = interpolate_range_image(ri, target_rows=5)
    # the valid native endpoint survives, everything toward the gap is 0
    assert out.values[0, 0] == 1.0
    assert not out.values[1:, 0].any()


def test_interpolate_output_shape():
    values = np.ones((16, 30))
    ri = RangeImage(values, np.linspace(-0.26, 0.26, 16), np.linspace(-1, 1, 30))
    out = interpolate_range_image(ri, target_rows=112)
    assert out.values.shape == (112, 30)
    assert out.elevations.size == 112
    assert np.allclose(np.diff(out.elevations), np.diff(out.elevations)[0])


def test_interpolate_preserves_native_endpoints():
    ri = ri_from_columns([[2.0], [4.0], [8.0]], [-0.2, 0.0, 0.2])
    out = interpolate_range_image(ri, target_rows=9)
    assert out.values[0, 0] == 2.0
    assert out.values[-1, 0] == 8.0


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0.5, 50.0), min_size=2, max_size=8))
def test_interpolate_monotone_bounded(ranges):
    n = len(ranges)
    ri = ri_from_columns([[r] for r in ranges], np.linspace(-0.3, 0.3, n))
    out = interpolate_range_image(ri, target_rows=37)
    col = out.values[:, 0]
    el = out.elevations
    native_el = ri.elevations
    for k, val in enumerate(col):
        if val == 0:
            continue
        i = min(np.searchsorted(native_el, el[k], side="right") - 1, n - 2)
        lo, hi = ranges[i], ranges[i + 1]
        assert min(lo, hi) - 1e-9 <= val <= max(lo, hi) + 1e-9


# ---------------------------------------------------------------- range/cloud

def test_range_to_cloud_empty():
    ri = RangeImage(np.zeros((2, 3)), [-0.1, 0.1], [0.0, 0.1, 0.2])
    assert range_to_cloud(ri).shape == (0, 3)


def test_range_to_cloud_axis_case():
    ri = RangeImage(np.array([[2.0]]), [0.0], [0.0])
    cloud = range_to_cloud(ri)
    assert np.allclose(cloud, [[2.0, 0.0, 0.0]])


def test_cloud_range_roundtrip(rng):
    elevations = np.linspace(-0.26, 0.26, 16)
    azimuths = np.linspace(-1.0, 1.0, 181)
    # synthesize points exactly on grid directions so binning is exact
    rows = rng.integers(0, 16, 300)
    cols = rng.integers(0, 181, 300)
    ranges = rng.uniform(1.0, 40.0, 300)
    ri = cloud_to_range(
        np.column_stack([
            ranges * np.cos(elevations[rows]) * np.cos(azimuths[cols]),
            ranges * np.cos(elevations[rows]) * np.sin(azimuths[cols]),
            ranges * np.sin(elevations[rows]),
        ]), elevations, azimuths)
    back = range_to_cloud(ri)
    again = cloud_to_range(back, elevations, azimuths)
    assert np.allclose(again.values, ri.values, atol=1e-9)


# ---------------------------------------------------------------------- mask

def brute_force_mask(K, T, radius, ground_z, step, bound):
    """Independent rasterization: per-sample Python-level projection."""
    mask = np.zeros((K.height, K.width), dtype=np.uint8)
    n = int(round(2 * bound / step)) + 1
    xs = np.linspace(-bound, bound, n)
    R, t = T.rotation, T.translation
    for X in xs:
        for Y in xs:
            if X * X + Y * Y > radius * radius:
                continue
            p = R @ np.array([X, Y, ground_z]) + t
            if p[2] <= 0:
                continue
            u = K.uc + K.lu * p[0] / p[2]
            v = K.vc + K.lv * p[1] / p[2]
            if 0 < u < K.width and 0 < v < K.height:
                mask[int(math.floor(v)), int(math.floor(u))] = 1
    return mask


def tilted_cam():
    # camera looking forward-down from 1.1 m above the ground sample plane
    pitch = 0.35
    R_rc = np.array([
        [0.0, -math.sin(pitch), math.cos(pitch)],
        [-1.0, 0.0, 0.0],
        [0.0, -math.cos(pitch), -math.sin(pitch)],
    ])
    T_robot_cam = RigidTransform(R_rc, [0.0, 0.0, 0.0])
    return T_robot_cam.inverse()


def test_mask_zero_radius(K):
    mask = blind_spot_mask(K, tilted_cam(), radius=0.0, step=0.05)
    assert not mask.any()


def test_mask_marks_projected_ground_point():
    K = small_K()
    T = tilted_cam()
    mask = blind_spot_mask(K, T, radius=2.0, ground_z=-1.1, step=0.01, bound=2.0)
    # the disk center projects inside the frame for this tilt
    p = T.rotation @ np.array([1.5, 0.0, -1.1]) + T.translation
    u = K.uc + K.lu * p[0] / p[2]
    v = K.vc + K.lv * p[1] / p[2]
    assert mask[int(v), int(u)] == 1


def test_mask_matches_brute_force_small():
    K = small_K()
    T = tilted_cam()
    kwargs = dict(radius=1.8, ground_z=-1.1, step=0.02, bound=2.0)
    fast = blind_spot_mask(K, T, **kwargs)
    slow = brute_force_mask(K, T, **kwargs)
    assert np.array_equal(fast, slow)


def test_mask_chunk_independent():
    K = small_K()
    T = tilted_cam()
    kwargs = dict(radius=1.5, ground_z=-1.1, step=0.05, bound=1.6)
    a = blind_spot_mask(K, T, chunk=7, **kwargs)
    b = blind_spot_mask(K, T, chunk=1000, **kwargs)
    assert np.array_equal(a, b)


# -------------------------------------------------------------------- fusion

def test_fuse_partition(rng):
    shape = (24, 32)
    lidar = rng.uniform(0, 10, shape) * (rng.random(shape) > 0.3)
    camera = rng.uniform(0, 5, shape) * (rng.random(shape) > 0.3)
    mask = (rng.random(shape) > 0.5).astype(np.uint8)
    fused = fuse_depth(lidar, camera, mask)
    assert np.array_equal(fused[mask == 1], camera[mask == 1])
    assert np.array_equal(fused[mask == 0], lidar[mask == 0])


def test_fuse_examples():
    lidar = np.array([[0.0, 3.2, 2.0]])
    camera = np.array([[1.5, 1.5, 1.5]])
    mask = np.array([[1, 0, 1]], dtype=np.uint8)
    fused = fuse_depth(lidar, camera, mask)
    assert fused.tolist() == [[1.5, 3.2, 1.5]]


def test_fuse_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        fuse_depth(np.zeros((2, 2)), np.zeros((2, 3)), np.zeros((2, 2)))


def test_select_depth_source():
    a, b = np.ones((2, 2)), np.full((2, 2), 2.0)
    assert select_depth_source("forward", a, b) is a
    assert select_depth_source("backward", a, b) is b
    same = select_depth_source("forward", a, a)
    assert np.array_equal(same, a)
    with pytest.raises(ValueError):
        select_depth_source("sideways", a, b)


# ------------------------------------------------------------------- file io

def test_point_cloud_text_roundtrip(tmp_path, rng):
    pts = rng.uniform(-10, 10, (17, 3))
    path = tmp_path / "cloud.txt"
    save_point_cloud(path, pts)
    back = load_point_cloud(path)
    assert np.allclose(back, pts, atol=1e-7)


def test_point_cloud_rejects_bad_line(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("1 2\n")
    with pytest.raises(ValueError):
        load_point_cloud(path)


def test_depth_pgm_golden_bit_exact(tmp_path):
    golden = Path(__file__).parent / "data" / "depth_golden.pgm"
    v, u = np.mgrid[0:16, 0:20]
    depth = np.where((u + v) % 3 == 0, 0.0, 1.5 + 0.25 * u + 0.1 * v)
    regenerated = tmp_path / "regen.pgm"
    write_depth_pgm(regenerated, depth)
    assert regenerated.read_bytes() == golden.read_bytes()
    loaded = read_depth_pgm(golden)
    assert loaded.shape == (16, 20)
    assert np.allclose(loaded, np.rint(depth * 1000) / 1000, atol=1e-9)
    assert np.array_equal(loaded == 0, depth == 0)


def test_depth_pgm_roundtrip_bit_exact(tmp_path, rng):
    depth = (rng.uniform(0, 60, (12, 9)) * (rng.random((12, 9)) > 0.2))
    p1 = tmp_path / "a.pgm"
    p2 = tmp_path / "b.pgm"
    write_depth_pgm(p1, depth)
    write_depth_pgm(p2, read_depth_pgm(p1))
    assert p1.read_bytes() == p2.read_bytes()
    back = read_depth_pgm(p1)
    assert np.allclose(back, np.rint(depth * 1000) / 1000, atol=1e-9)
