import numpy as np
import pytest

from viki.camera import (
    CameraIntrinsics, back_project, interaction_matrix, interaction_row,
    project, project_points,
)
from viki.errors import BehindCamera, DegenerateFeatures, NonPositiveDepth


def box_features(cu, cv, half_w, half_h):
    return np.array([
        [cu - half_w, cv - half_h],
        [cu - half_w, cv + half_h],
        [cu + half_w, cv + half_h],
        [cu + half_w, cv - half_h],
    ])


def test_project_optical_axis(K):
    assert np.allclose(project([0, 0, 2], K), [640, 360])


def test_project_offset_point(K):
    assert np.allclose(project([0.5, 0, 2], K), [790, 360])


def test_project_behind_camera(K):
    with pytest.raises(BehindCamera):
        project([0, 0, -1], K)


def test_project_points_flags_behind(K):
    pix, front = project_points([[0, 0, 2], [0, 0, -2]], K)
    assert front.tolist() == [True, False]
    assert np.allclose(pix[0], [640, 360])


def test_interaction_row_centered_unit():
    L = interaction_row([0.0, 0.0], Z=1.0, l=1.0)
    expected = np.array([
        [-1, 0, 0, 0, -1, 0],
        [0, -1, 0, 1, 0, 0],
    ], dtype=float)
    assert np.array_equal(L, expected)


def test_interaction_row_depth_scaling():
    f = [30.0, -40.0]
    L1 = interaction_row(f, Z=1.5, l=600.0)
    L2 = interaction_row(f, Z=3.0, l=600.0)
    assert np.allclose(L2[:, :3], L1[:, :3] / 2.0)
    assert np.array_equal(L2[:, 3:], L1[:, 3:])


def test_interaction_row_rejects_zero_depth():
    with pytest.raises(NonPositiveDepth):
        interaction_row([0.0, 0.0], Z=0.0, l=600.0)


def test_interaction_matrix_stacks_rows(K):
    feats = box_features(700, 400, 50, 30)
    L = interaction_matrix(feats, 3.0, K)
    assert L.shape == (8, 6)
    centered = feats - [K.uc, K.vc]
    for i, f in enumerate(centered):
        assert np.array_equal(L[2 * i:2 * i + 2], interaction_row(f, 3.0, K.lu))


def test_interaction_matrix_rejects_coincident(K):
    feats = np.tile([640.0, 360.0], (4, 1))
    with pytest.raises(DegenerateFeatures):
        interaction_matrix(feats, 3.0, K)


def test_interaction_matrix_needs_three_features(K):
    with pytest.raises(DegenerateFeatures):
        interaction_matrix(np.array([[0.0, 0.0], [1.0, 1.0]]), 3.0, K)


def moved_pixel_delta(p, twist, K):
    """First-order feature displacement oracle from the projection model.

    A camera twist (v, w) moves a static point p in the camera frame at
    pdot = -v - w x p; integrate for 1 s (the twist is tiny) and reproject.
    """
    v, w = twist[:3], twist[3:]
    p2 = p - (v + np.cross(w, p))
    return project(p2, K) - project(p, K)


def test_finite_difference_consistency(K, rng):
    for _ in range(200):
        p = np.array([rng.uniform(-1, 1), rng.uniform(-1, 1),
                      rng.uniform(0.5, 6.0)])
        twist = rng.normal(size=6)
        twist *= 1e-4 / np.linalg.norm(twist)
        pix = project(p, K)
        L = interaction_row(pix - [K.uc, K.vc], p[2], K.lu)
        predicted = L @ twist
        actual = moved_pixel_delta(p, twist, K)
        assert np.linalg.norm(predicted - actual) <= 1e-2 * np.linalg.norm(actual)


def test_project_back_project_roundtrip(K, rng):
    for _ in range(100):
        p = np.array([rng.uniform(-2, 2), rng.uniform(-2, 2),
                      rng.uniform(0.2, 8.0)])
        q = back_project(project(p, K), p[2], K)
        assert np.allclose(q, p, atol=1e-9)


def test_non_square_pixels_warn():
    with pytest.warns(UserWarning):
        CameraIntrinsics(lu=600.0, lv=601.0, uc=640.0, vc=360.0)
