"""Controller gate, velocity smoothing and the 3-stage placement machine.

The gate is hard: each tick exactly one controller's output reaches the
actuators.  A detection routes the visual-servo output through; a miss
routes the kinematic fallback computed from the last memorized target.
"""

import enum
from dataclasses import dataclass

import numpy as np

from .errors import NoTargetYet
from .geometry import RigidTransform, transform_point
from .kinematic_ctrl import TargetPoint
from .perception import ObjectEstimate
from .vehicle import Twist2


class Stage(enum.IntEnum):
    FORWARD = 1
    ROTATE = 2
    BACKWARD = 3
    DONE = 4


@dataclass(frozen=True)
class PlacementState:
    stage: Stage = Stage.FORWARD
    entered_at: int = 0


@dataclass(frozen=True)
class SwitchThresholds:
    feature_tol: float = 2.0    # px, open interval (-tol, tol)
    position_tol: float = 0.01  # m, open interval (-tol, tol)

    def __post_init__(self):
        if self.feature_tol <= 0 or self.position_tol <= 0:
            raise ValueError("thresholds must be positive")


def hybrid_law(c: int, vs_out: Twist2, kin_out: Twist2 | None) -> Twist2:
    """Select the visual-servo output on detection, else the kinematic one.

    Raises NoTargetYet when no detection is present and no target was ever
    memorized (the task must start with at least one detection).
    """
    if c:
        return vs_out
    if kin_out is None:
        raise NoTargetYet("no detection yet: kinematic fallback has no target")
    return kin_out


def smooth(v_n: Twist2, v_prev: Twist2) -> Twist2:
    """Damp frame-to-frame velocity jumps: (1 - (Vn - Vprev)) * Vn.

    Applied elementwise on the numeric (nu, omega) values; its fixed
    points are exactly Vn == Vprev, and zero absorbs.
    """
    return Twist2(
        (1.0 - (v_n.nu - v_prev.nu)) * v_n.nu,
        (1.0 - (v_n.omega - v_prev.omega)) * v_n.omega,
    )


def update_target(est: ObjectEstimate, camera_pose_world: RigidTransform) -> TargetPoint:
    """Memorize the detected object as a planar world-frame target.

    The camera-frame estimate is mapped to the world and projected to the
    ground plane; every new detection overwrites the previous target.
    """
    p_world = transform_point(camera_pose_world, est.position)
    return TargetPoint(float(p_world[0]), float(p_world[1]))


def placement_step(ps: PlacementState, feature_err, pos_err,
                   thresholds: SwitchThresholds, tick: int = 0) -> PlacementState:
    """Advance the placement machine when its stage's error test passes.

    Forward and backward stages advance when every feature-error component
    lies strictly inside (-feature_tol, feature_tol); the rotate stage
    advances when both position-error components lie strictly inside
    (-position_tol, position_tol).  Errors passed as None never fire.
    """
    stage = ps.stage
    if stage == Stage.FORWARD and _within(feature_err, thresholds.feature_tol):
        return PlacementState(Stage.ROTATE, tick)
    if stage == Stage.ROTATE and _within(pos_err, thresholds.position_tol):
        return PlacementState(Stage.BACKWARD, tick)
    if stage == Stage.BACKWARD and _within(feature_err, thresholds.feature_tol):
        return PlacementState(Stage.DONE, tick)
    return ps


def _within(err, tol: float) -> bool:
    if err is None:
        return False
    err = np.asarray(err, dtype=float).reshape(-1)
    return bool(np.all(np.abs(err) < tol))
