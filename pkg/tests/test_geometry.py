import numpy as np
import pytest
from hypothesis import given, strategies as st

from viki.geometry import (
    RigidTransform, rot_x, rot_y, rot_z, skew, transform_point,
    transform_points, velocity_adjoint,
)

angles = st.floats(-np.pi, np.pi, allow_nan=False)
coords = st.floats(-10.0, 10.0, allow_nan=False)


def random_transform(rng):
    R = rot_z(rng.uniform(-np.pi, np.pi)) @ rot_y(rng.uniform(-np.pi, np.pi)) \
        @ rot_x(rng.uniform(-np.pi, np.pi))
    return RigidTransform(R, rng.uniform(-5, 5, 3))


def test_transform_point_identity():
    T = RigidTransform.identity()
    assert np.allclose(transform_point(T, [1, 2, 3]), [1, 2, 3])


def test_transform_point_translation():
    T = RigidTransform(np.eye(3), [0, 0, 5])
    assert np.allclose(transform_point(T, [1, 2, 3]), [1, 2, 8])


def test_transform_point_rotation_z90():
    T = RigidTransform(rot_z(np.pi / 2), np.zeros(3))
    assert np.allclose(transform_point(T, [1, 0, 0]), [0, 1, 0], atol=1e-15)


def test_transform_points_matches_scalar(rng):
    T = random_transform(rng)
    pts = rng.uniform(-3, 3, (20, 3))
    batch = transform_points(T, pts)
    for p, q in zip(pts, batch):
        assert np.allclose(transform_point(T, p), q)


def test_invalid_rotation_rejected():
    with pytest.raises(ValueError):
        RigidTransform(np.eye(3) * 2.0, np.zeros(3))
    with pytest.raises(ValueError):
        RigidTransform(np.diag([1.0, 1.0, -1.0]), np.zeros(3))


def test_skew_zero_and_definition():
    assert np.array_equal(skew([0, 0, 0]), np.zeros((3, 3)))
    expected = np.array([[0, -3, 2], [3, 0, -1], [-2, 1, 0]], dtype=float)
    assert np.array_equal(skew([1, 2, 3]), expected)


@given(st.tuples(coords, coords, coords))
def test_skew_antisymmetric_and_annihilates(t):
    S = skew(t)
    assert np.array_equal(S + S.T, np.zeros((3, 3)))
    assert np.allclose(S @ np.asarray(t), 0.0, atol=1e-12)


def test_adjoint_identity():
    assert np.array_equal(velocity_adjoint(RigidTransform.identity()).matrix,
                          np.eye(6))


def test_adjoint_zero_translation_is_block_diagonal(rng):
    R = rot_z(0.7) @ rot_x(-0.3)
    A = velocity_adjoint(RigidTransform(R, np.zeros(3))).matrix
    assert np.allclose(A[:3, :3], R)
    assert np.allclose(A[3:, 3:], R)
    assert np.allclose(A[:3, 3:], 0.0)
    assert np.allclose(A[3:, :3], 0.0)


def test_adjoint_lever_arm():
    # hand evaluation of skew(t) @ w for t = x-hat, w = z-hat: t x w = -y-hat
    A = velocity_adjoint(RigidTransform(np.eye(3), [1, 0, 0]))
    mapped = A.apply([0, 0, 0, 0, 0, 1])
    assert np.allclose(mapped, [0, -1, 0, 0, 0, 1])


def test_adjoint_multiplicative(rng):
    for _ in range(50):
        T1, T2 = random_transform(rng), random_transform(rng)
        lhs = velocity_adjoint(T1.compose(T2)).matrix
        rhs = velocity_adjoint(T1).matrix @ velocity_adjoint(T2).matrix
        assert np.allclose(lhs, rhs, atol=1e-9)


def test_transform_inverse_roundtrip(rng):
    for _ in range(50):
        T = random_transform(rng)
        p = rng.uniform(-4, 4, 3)
        back = transform_point(T.inverse(), transform_point(T, p))
        assert np.allclose(back, p, atol=1e-9)


def test_compose_associative(rng):
    T1, T2, T3 = (random_transform(rng) for _ in range(3))
    a = T1.compose(T2).compose(T3)
    b = T1.compose(T2.compose(T3))
    assert np.allclose(a.rotation, b.rotation, atol=1e-12)
    assert np.allclose(a.translation, b.translation, atol=1e-12)
