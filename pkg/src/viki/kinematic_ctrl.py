"""Position feedback law used when the target is not visible.

Drives the vehicle's control point toward a planar target through the
inverse body Jacobian, with a tanh on the error so the raw command is
bounded by the gains before actuator saturation.
"""

from dataclasses import dataclass

import numpy as np

from .vehicle import Twist2, VehicleParams, body_jacobian


@dataclass(frozen=True)
class KinGains:
    """Positive per-axis gains on the tanh of the position error."""

    k1: np.ndarray

    def __post_init__(self):
        k1 = np.asarray(self.k1, dtype=float).reshape(2)
        if np.any(k1 <= 0):
            raise ValueError("gains must be positive")
        object.__setattr__(self, "k1", k1)


@dataclass(frozen=True)
class TargetPoint:
    """Planar target in the world/odometry frame."""

    X: float
    Y: float

    def as_array(self) -> np.ndarray:
        return np.array([self.X, self.Y])


def position_error(h, h_d: TargetPoint) -> np.ndarray:
    """Error pointing from the current position toward the target."""
    h = np.asarray(h, dtype=float).reshape(2)
    return h_d.as_array() - h


def robot_velocity_kin(err, theta: float, params: VehicleParams,
                       gains: KinGains) -> Twist2:
    """Feedback law J_b^-1 (k1 * tanh(err)); zero error gives zero command.

    The output is unsaturated; steering conversion and clamping happen in
    the vehicle module.
    """
    err = np.asarray(err, dtype=float).reshape(2)
    v = np.linalg.solve(body_jacobian(theta, params.d),
                        gains.k1 * np.tanh(err))
    return Twist2(float(v[0]), float(v[1]))
