import numpy as np
import pytest
from hypothesis import given, strategies as st

from viki.errors import NoTargetYet
from viki.geometry import RigidTransform
from viki.hybrid import (
    PlacementState, Stage, SwitchThresholds, hybrid_law, placement_step,
    smooth, update_target,
)
from viki.perception import ObjectEstimate
from viki.vehicle import Twist2

THR = SwitchThresholds()

X_FORWARD_CAM = RigidTransform(
    np.array([[0.0, 0.0, 1.0], [-1.0, 0.0, 0.0], [0.0, -1.0, 0.0]]),
    np.zeros(3))

vel = st.floats(-0.5, 0.5, allow_nan=False)


# --------------------------------------------------------------------- gate

def test_gate_detection_present():
    out = hybrid_law(1, Twist2(0.3, 0.1), Twist2(0.5, 0.0))
    assert out == Twist2(0.3, 0.1)


def test_gate_detection_absent():
    out = hybrid_law(0, Twist2(-0.2, 0.3), Twist2(0.5, 0.0))
    assert out == Twist2(0.5, 0.0)


def test_gate_requires_first_detection():
    with pytest.raises(NoTargetYet):
        hybrid_law(0, Twist2(0.1, 0.0), None)


@given(vel, vel, vel, vel)
def test_gate_exclusive(a, b, c, d):
    vs, kin = Twist2(a, b), Twist2(c, d)
    assert hybrid_law(1, vs, kin) is vs
    assert hybrid_law(0, vs, kin) is kin


# ------------------------------------------------------------------- smooth

def test_smooth_fixed_point():
    v = Twist2(0.2, 0.1)
    assert smooth(v, v) == v


def test_smooth_hand_example():
    out = smooth(Twist2(0.5, 0.0), Twist2(0.4, 0.0))
    assert out.nu == pytest.approx((1 - 0.1) * 0.5, rel=1e-12)
    assert out.omega == 0.0


def test_smooth_zero_absorbs():
    assert smooth(Twist2(0.0, 0.0), Twist2(0.4, -0.2)) == Twist2(0.0, 0.0)


@given(vel, vel)
def test_smooth_fixed_points_exact(nu, omega):
    v = Twist2(nu, omega)
    out = smooth(v, v)
    assert out.nu == v.nu and out.omega == v.omega


def test_smooth_brute_force_oracle(rng):
    for _ in range(200):
        vn = Twist2(*rng.uniform(-1, 1, 2))
        vp = Twist2(*rng.uniform(-1, 1, 2))
        out = smooth(vn, vp)
        for got, n, p in ((out.nu, vn.nu, vp.nu), (out.omega, vn.omega, vp.omega)):
            assert got == (1.0 - (n - p)) * n


# ------------------------------------------------------------------- target

def test_update_target_x_forward_mount():
    est = ObjectEstimate(np.array([0.0, 0.0, 2.0]))
    h_d = update_target(est, X_FORWARD_CAM)
    assert (h_d.X, h_d.Y) == pytest.approx((2.0, 0.0))


def test_update_target_idempotent_and_overwrites():
    est1 = ObjectEstimate(np.array([0.0, 0.0, 2.0]))
    est2 = ObjectEstimate(np.array([0.5, 0.0, 3.0]))
    a = update_target(est1, X_FORWARD_CAM)
    b = update_target(est1, X_FORWARD_CAM)
    assert (a.X, a.Y) == (b.X, b.Y)
    c = update_target(est2, X_FORWARD_CAM)
    assert (c.X, c.Y) != (a.X, a.Y)


def test_update_target_drops_height():
    # camera pitched: the estimate has a vertical component that must vanish
    est = ObjectEstimate(np.array([0.0, 0.4, 2.0]))
    h_d = update_target(est, X_FORWARD_CAM)
    assert h_d.X == pytest.approx(2.0)
    assert h_d.Y == pytest.approx(0.0)


# ------------------------------------------------------------------- states

def test_forward_advances_inside_tolerance():
    ps = PlacementState(Stage.FORWARD, 0)
    out = placement_step(ps, np.full(8, 1.5), None, THR, tick=7)
    assert out.stage == Stage.ROTATE and out.entered_at == 7


def test_rotate_advances_inside_tolerance():
    ps = PlacementState(Stage.ROTATE, 3)
    out = placement_step(ps, None, np.array([0.005, -0.009]), THR, tick=9)
    assert out.stage == Stage.BACKWARD


def test_forward_holds_outside_tolerance():
    ps = PlacementState(Stage.FORWARD, 0)
    out = placement_step(ps, np.array([3.0, 0.1, 0.0, 0.0]), None, THR)
    assert out is ps


def test_backward_to_done():
    ps = PlacementState(Stage.BACKWARD, 5)
    out = placement_step(ps, np.full(8, 0.5), None, THR, tick=11)
    assert out.stage == Stage.DONE


def test_transitions_fire_exactly_at_bounds():
    thr = SwitchThresholds(feature_tol=2.0, position_tol=0.01)
    fwd = PlacementState(Stage.FORWARD, 0)
    # straddle the +/-2 px bound
    assert placement_step(fwd, [2.0], None, thr).stage == Stage.FORWARD
    assert placement_step(fwd, [-2.0], None, thr).stage == Stage.FORWARD
    assert placement_step(fwd, [1.9999999], None, thr).stage == Stage.ROTATE
    assert placement_step(fwd, [-1.9999999], None, thr).stage == Stage.ROTATE
    rot = PlacementState(Stage.ROTATE, 0)
    # straddle the +/-0.01 m bound
    assert placement_step(rot, None, [0.01, 0.0], thr).stage == Stage.ROTATE
    assert placement_step(rot, None, [0.0, -0.01], thr).stage == Stage.ROTATE
    assert placement_step(rot, None, [0.0099999, 0.0], thr).stage == Stage.BACKWARD
    bwd = PlacementState(Stage.BACKWARD, 0)
    assert placement_step(bwd, [2.0, 0.0], None, thr).stage == Stage.BACKWARD
    assert placement_step(bwd, [1.9999999, 0.0], None, thr).stage == Stage.DONE


def test_one_component_out_of_bound_blocks():
    out = placement_step(PlacementState(Stage.FORWARD, 0),
                         [0.1, 0.2, 2.4, 0.0], None, THR)
    assert out.stage == Stage.FORWARD


def test_missing_errors_never_fire():
    for stage in (Stage.FORWARD, Stage.ROTATE, Stage.BACKWARD):
        ps = PlacementState(stage, 0)
        assert placement_step(ps, None, None, THR) is ps


def test_done_is_absorbing():
    ps = PlacementState(Stage.DONE, 9)
    assert placement_step(ps, np.zeros(8), np.zeros(2), THR) is ps


def test_sequence_is_forward_prefix():
    order = [Stage.FORWARD, Stage.ROTATE, Stage.BACKWARD, Stage.DONE]
    ps = PlacementState(Stage.FORWARD, 0)
    seen = [ps.stage]
    errs = [(np.ones(8) * 0.1, None), (None, np.zeros(2)), (np.zeros(8), None)]
    for fe, pe in errs:
        ps = placement_step(ps, fe, pe, THR)
        seen.append(ps.stage)
    assert seen == order


def test_threshold_validation():
    with pytest.raises(ValueError):
        SwitchThresholds(feature_tol=0.0)
    with pytest.raises(ValueError):
        SwitchThresholds(position_tol=-1.0)
