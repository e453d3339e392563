"""Car-like (bicycle) kinematic plant and actuation limits.

The planar pose is ``(X, Y, theta)`` in the world frame with the heading
kept in (-pi, pi].  The controlled point sits one wheelbase ahead of the
pose origin (front axle), which is what the 2x2 body Jacobian encodes.
"""

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class VehicleState:
    X: float
    Y: float
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "theta", wrap_angle(self.theta))

    def control_point(self, d: float) -> np.ndarray:
        """Position of the point the feedback law steers (front axle)."""
        return np.array([
            self.X + d * math.cos(self.theta),
            self.Y + d * math.sin(self.theta),
        ])


@dataclass(frozen=True)
class VehicleCommand:
    nu: float    # linear velocity, m/s
    psi: float   # steering angle, rad


@dataclass(frozen=True)
class Twist2:
    nu: float     # linear velocity, m/s
    omega: float  # yaw rate, rad/s

    def as_array(self) -> np.ndarray:
        return np.array([self.nu, self.omega])


@dataclass(frozen=True)
class VehicleParams:
    d: float = 1.0            # wheelbase, m
    nu_max: float = 0.5       # |linear velocity| limit, m/s
    psi_max: float = 0.44     # |steering angle| limit, rad
    nu_epsilon: float = 1e-6  # steering-singularity floor, m/s

    def __post_init__(self):
        if self.d <= 0:
            raise ValueError("wheelbase d must be positive")
        if self.nu_epsilon <= 0:
            raise ValueError("nu_epsilon must be positive")


def wrap_angle(a: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    a = math.remainder(a, 2.0 * math.pi)
    if a <= -math.pi:
        a += 2.0 * math.pi
    return a


def body_jacobian(theta: float, d: float) -> np.ndarray:
    """2x2 map from (nu, omega) to the control-point world velocity.

    Its determinant equals the wheelbase d for every heading, so the
    inverse used by the position feedback law always exists.
    """
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -d * s], [s, d * c]])


def integrate(state: VehicleState, cmd: VehicleCommand, dt: float,
              params: VehicleParams) -> VehicleState:
    """One explicit-Euler step of the bicycle model."""
    omega = cmd.nu * math.tan(cmd.psi) / params.d
    return VehicleState(
        state.X + cmd.nu * math.cos(state.theta) * dt,
        state.Y + cmd.nu * math.sin(state.theta) * dt,
        state.theta + omega * dt,
    )


def steering_from_twist(twist: Twist2, params: VehicleParams) -> float:
    """Convert a yaw-rate demand into a clamped steering angle.

    The conversion divides by the linear velocity, so |nu| is floored at
    params.nu_epsilon (sign preserved, nu == 0 treated as +epsilon) before
    taking the arctangent.
    """
    nu = twist.nu
    if nu >= 0.0:
        nu_eff = max(nu, params.nu_epsilon)
    else:
        nu_eff = min(nu, -params.nu_epsilon)
    psi = math.atan(params.d * twist.omega / nu_eff)
    return max(-params.psi_max, min(params.psi_max, psi))


def saturate(cmd: VehicleCommand, params: VehicleParams) -> VehicleCommand:
    """Componentwise clamp to the actuator ranges."""
    return VehicleCommand(
        max(-params.nu_max, min(params.nu_max, cmd.nu)),
        max(-params.psi_max, min(params.psi_max, cmd.psi)),
    )


def max_yaw_rate(params: VehicleParams) -> float:
    """Largest yaw rate the steering geometry can realize."""
    return params.nu_max * math.tan(params.psi_max) / params.d


def clamp_twist(twist: Twist2, params: VehicleParams) -> Twist2:
    """Clamp a raw controller twist to the achievable velocity ranges.

    Keeps both components within what the actuators can track, so the
    frame-to-frame output filter sees bounded values (its damping factor
    stays in [0, 2] and cannot flip signs).
    """
    w_max = max_yaw_rate(params)
    return Twist2(
        max(-params.nu_max, min(params.nu_max, twist.nu)),
        max(-w_max, min(w_max, twist.omega)),
    )
