"""Hybrid visual-servoing + kinematic control stack for a car-like robot.

Pure-numpy controller and sensor-fusion library plus a deterministic
closed-loop simulator.  Subpackages:

- ``geometry``        rigid transforms, skew matrices, velocity adjoints
- ``vehicle``         bicycle kinematics, steering conversion, saturation
- ``camera``          pinhole model and interaction (image Jacobian) matrix
- ``fusion``          LiDAR projection, virtual-layer interpolation,
                      blind-spot mask, depth fusion
- ``perception``      synthetic detector, bbox shrink, depth averaging,
                      3D localization
- ``visual_servo``    desired-feature estimation, camera/robot servo laws
- ``kinematic_ctrl``  position feedback law
- ``hybrid``          controller gate, output smoothing, placement states
- ``world``           analytic ground-plane + box world for the simulator
- ``config``          scenario configuration and file format
- ``harness``         closed-loop scenario runner, logging, metrics
- ``cli``             command-line entry points
"""

__version__ = "0.1.0"
