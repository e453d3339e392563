"""Closed-loop scenario execution, logging and run metrics.

One run is strictly single threaded and deterministic given (config,
seed): the detector and odometry noise draw from independent child
streams of the scenario seed, the detector consumes a fixed number of
draws per tick, and log serialization is format-stable.
"""

import csv
import math
import time
from dataclasses import dataclass, replace

import numpy as np

from .camera import CameraIntrinsics, project_points
from .config import ScenarioConfig
from .errors import (
    DegenerateFeatures, EmptyBox, EmptyLog, FirstDetectionTimeout,
    NonPositiveDepth, NoValidDepth, SingularCombined,
)
from .fusion import (
    blind_spot_mask, fuse_depth, interpolate_range_image,
    project_cloud_to_depth, range_to_cloud, select_depth_source,
)
from .geometry import RigidTransform, rot_z, transform_points, velocity_adjoint
from .hybrid import (
    PlacementState, Stage, hybrid_law, placement_step, smooth, update_target,
)
from .kinematic_ctrl import TargetPoint, position_error, robot_velocity_kin
from .perception import (
    BoundingBox, Detection, SyntheticDetector, localize, object_depth,
    range_to_depth_correction, shrink_bbox,
)
from .vehicle import (
    Twist2, VehicleCommand, VehicleState, clamp_twist, integrate, saturate,
    steering_from_twist,
)
from .visual_servo import (
    current_features, desired_features, feature_error, camera_twist,
    robot_velocity_vs,
)
from .world import BoxWorld, camera_depth_regions, lidar_range_image

ZERO_VELOCITY_EPS = 1e-9

LOG_FIELDS = [
    "tick", "t", "state_id", "c", "controller",
    "f_u0", "f_v0", "f_u1", "f_v1", "f_u2", "f_v2", "f_u3", "f_v3",
    "fd_u0", "fd_v0", "fd_u1", "fd_v1", "fd_u2", "fd_v2", "fd_u3", "fd_v3",
    "max_feature_err", "nu_cmd", "psi_cmd", "omega_cmd",
    "X_odom", "Y_odom", "theta_odom",
    "X_true", "Y_true", "theta_true",
    "X_d", "Y_d", "Z_o",
]

_INT_FIELDS = {"tick", "state_id", "c"}
_STR_FIELDS = {"controller"}


@dataclass
class LogRecord:
    tick: int
    t: float
    state_id: int
    c: int
    controller: str
    f_u0: float
    f_v0: float
    f_u1: float
    f_v1: float
    f_u2: float
    f_v2: float
    f_u3: float
    f_v3: float
    fd_u0: float
    fd_v0: float
    fd_u1: float
    fd_v1: float
    fd_u2: float
    fd_v2: float
    fd_u3: float
    fd_v3: float
    max_feature_err: float
    nu_cmd: float
    psi_cmd: float
    omega_cmd: float
    X_odom: float
    Y_odom: float
    theta_odom: float
    X_true: float
    Y_true: float
    theta_true: float
    X_d: float
    Y_d: float
    Z_o: float

    def features(self) -> np.ndarray:
        return np.array([[self.f_u0, self.f_v0], [self.f_u1, self.f_v1],
                         [self.f_u2, self.f_v2], [self.f_u3, self.f_v3]])

    def desired(self) -> np.ndarray:
        return np.array([[self.fd_u0, self.fd_v0], [self.fd_u1, self.fd_v1],
                         [self.fd_u2, self.fd_v2], [self.fd_u3, self.fd_v3]])


@dataclass(frozen=True)
class RunMetrics:
    final_err_x: float
    final_err_y: float
    mse_x: float
    mse_y: float
    zero_velocity_ticks: int
    converged: bool
    iteration_time_mean_ms: float


@dataclass
class RunResult:
    log: list
    detections: list
    final_stage: Stage
    iteration_time_mean_ms: float

    def metrics(self, target) -> RunMetrics:
        return compute_metrics(
            self.log, target, converged=self.final_stage == Stage.DONE,
            iteration_time_mean_ms=self.iteration_time_mean_ms)


# ------------------------------------------------------------- mask caching

_MASK_CACHE: dict = {}


def scenario_mask(cfg: ScenarioConfig) -> np.ndarray:
    """Blind-spot mask for a scenario; cached per (camera, extrinsics, params).

    The dense ground sampling makes this the only expensive precompute, so
    repeated runs of one scenario share it.
    """
    K = cfg.front_camera.K
    T = cfg.front_camera.T_robot_cam().inverse().compose(
        cfg.lidar.T_robot_lidar())
    key = (
        K.lu, K.lv, K.uc, K.vc, K.width, K.height,
        T.rotation.tobytes(), T.translation.tobytes(),
        cfg.mask.radius, cfg.mask.ground_z, cfg.mask.bound, cfg.mask.step,
    )
    cached = _MASK_CACHE.get(key)
    if cached is None:
        cached = blind_spot_mask(K, T, cfg.mask.radius, cfg.mask.ground_z,
                                 cfg.mask.step, cfg.mask.bound)
        _MASK_CACHE[key] = cached
    return cached


# ------------------------------------------------------------------ running


def pose_transform(x: float, y: float, theta: float) -> RigidTransform:
    return RigidTransform(rot_z(theta), [x, y, 0.0])


def _object_pixel_rect(world_corners, T_world_cam, K: CameraIntrinsics,
                       margin: int):
    cam = transform_points(T_world_cam.inverse(), world_corners)
    if np.any(cam[:, 2] <= 0):
        return None
    pix, _ = project_points(cam, K)
    u0 = int(math.floor(pix[:, 0].min())) - margin
    v0 = int(math.floor(pix[:, 1].min())) - margin
    u1 = int(math.ceil(pix[:, 0].max())) + margin
    v1 = int(math.ceil(pix[:, 1].max())) + margin
    if u1 <= 0 or v1 <= 0 or u0 >= K.width or v0 >= K.height:
        return None
    return (max(0, u0), max(0, v0), min(K.width, u1), min(K.height, v1))


def _placement_patch(placement, K: CameraIntrinsics, half: int = 2):
    u, v = int(placement.center_u), int(placement.center_v)
    return (max(0, u - half), max(0, v - half),
            min(K.width, u + half + 1), min(K.height, v + half + 1))


class ScenarioRunner:
    """Stateful supervisor for one scenario run (single thread, one use)."""

    def __init__(self, cfg: ScenarioConfig, trace=None):
        self.cfg = cfg
        seeds = np.random.SeedSequence(cfg.seed).spawn(2)
        self.detector = SyntheticDetector(
            replace(cfg.detector, rng_seed=seeds[0]))
        self.odo_rng = np.random.default_rng(seeds[1])
        self.trace_flags = (None if trace is None
                            else [det.detected for _, det in trace])

        self.world = BoxWorld(cfg.obj.center(), cfg.obj.extents)
        self.obj_corners = self.world.box_corners()
        self.T_rc1 = cfg.front_camera.T_robot_cam()
        self.T_rc2 = cfg.rear_camera.T_robot_cam()
        self.T_rl = cfg.lidar.T_robot_lidar()
        self.T_c1_lidar = self.T_rc1.inverse().compose(self.T_rl)
        self.adj_front = velocity_adjoint(self.T_rc1.inverse())
        self.adj_rear = velocity_adjoint(self.T_rc2.inverse())
        self.elevations = cfg.lidar.elevations()
        self.azimuths = cfg.lidar.azimuths()
        self.mask = scenario_mask(cfg)
        self.mask_bool = self.mask != 0
        self.noise_margin = max(8, int(math.ceil(4 * cfg.detector.pixel_noise)))
        self.static_desired = (self._static_desired_features()
                               if cfg.mode == "mgbm-static" else None)

        x0, y0, th0 = cfg.start_pose
        self.true_state = VehicleState(x0, y0, th0)
        self.odom_state = self._observe(self.true_state)
        self.stage = PlacementState(Stage.FORWARD, 0)
        self.target: TargetPoint | None = None
        self.waypoint: TargetPoint | None = None
        self.prev_twist = Twist2(0.0, 0.0)
        self.first_detection_tick: int | None = None

    # -- setup helpers

    def _static_desired_features(self) -> np.ndarray:
        """Fixed desired bbox from assumed object dimensions at the goal pose.

        Projects a virtual box of the assumed extents placed where the
        forward leg should end; never updated afterwards.
        """
        cfg = self.cfg
        ext = np.asarray(cfg.mgbm_assumed_extents
                         if cfg.mgbm_assumed_extents is not None
                         else cfg.obj.extents, dtype=float)
        center = np.array([cfg.placement.forward_standoff, 0.0, ext[2] / 2.0])
        signs = np.array([[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1)
                          for sz in (-1, 1)], dtype=float)
        corners = center + signs * ext / 2.0
        cam = transform_points(self.T_rc1.inverse(), corners)
        pix, front = project_points(cam, cfg.front_camera.K)
        if not front.all():
            raise ValueError("assumed goal box projects behind the camera")
        bb = BoundingBox(pix[:, 0].min(), pix[:, 1].min(),
                         pix[:, 0].max(), pix[:, 1].max())
        return bb.corners()

    def _observe(self, state: VehicleState) -> VehicleState:
        cfg = self.cfg
        if cfg.odom_noise_xy == 0.0 and cfg.odom_noise_theta == 0.0:
            return state
        nx, ny = self.odo_rng.normal(0.0, cfg.odom_noise_xy, 2)
        nth = self.odo_rng.normal(0.0, cfg.odom_noise_theta)
        return VehicleState(state.X + nx, state.Y + ny, state.theta + nth)

    # -- per-stage wiring

    def _active_camera(self):
        if self.stage.stage == Stage.FORWARD:
            return (self.cfg.front_camera, self.T_rc1, self.adj_front,
                    self.cfg.servo_front, self.cfg.placement.forward)
        if self.stage.stage == Stage.BACKWARD:
            return (self.cfg.rear_camera, self.T_rc2, self.adj_rear,
                    self.cfg.servo_rear, self.cfg.placement.backward)
        return None

    def _kin_target(self) -> TargetPoint | None:
        if self.stage.stage == Stage.ROTATE:
            return self.waypoint
        return self.target

    def _kin_gains(self):
        if self.stage.stage == Stage.BACKWARD:
            return self.cfg.kin_backward
        return self.cfg.kin_forward

    def _enter_rotate(self, tick: int):
        base = np.array([self.odom_state.X, self.odom_state.Y])
        tgt = self.target.as_array()
        line = tgt - base
        norm = np.linalg.norm(line)
        direction = line / norm if norm > 1e-9 else np.array([1.0, 0.0])
        wp = tgt + direction * self.cfg.placement.rotate_overshoot
        self.waypoint = TargetPoint(float(wp[0]), float(wp[1]))

    # -- main loop

    def run(self) -> RunResult:
        cfg = self.cfg
        log: list[LogRecord] = []
        detections: list = []
        control_time = 0.0
        timed_ticks = 0

        for tick in range(cfg.max_ticks):
            t = tick * cfg.dt
            stage_now = self.stage.stage
            T_wr_true = pose_transform(self.true_state.X, self.true_state.Y,
                                       self.true_state.theta)
            T_wr_odom = pose_transform(self.odom_state.X, self.odom_state.Y,
                                       self.odom_state.theta)
            cam1_pose = T_wr_true.compose(self.T_rc1)
            cam2_pose = T_wr_true.compose(self.T_rc2)

            active = self._active_camera()
            det = Detection(False)
            dI_in = None
            if active is not None:
                cam, T_rc, adj, gains, placement = active
                cam_pose = cam1_pose if stage_now == Stage.FORWARD else cam2_pose

                # -- sensor synthesis (stands in for hardware, not timed)
                ri_native = lidar_range_image(
                    self.world, T_wr_true.compose(self.T_rl), self.elevations,
                    self.azimuths, cfg.lidar.max_range)
                regions1 = [_placement_patch(cfg.placement.forward,
                                             cfg.front_camera.K)]
                regions2 = [_placement_patch(cfg.placement.backward,
                                             cfg.rear_camera.K)]
                rect = _object_pixel_rect(self.obj_corners, cam_pose, cam.K,
                                          self.noise_margin)
                if rect:
                    (regions1 if stage_now == Stage.FORWARD
                     else regions2).append(rect)
                dI_c1 = camera_depth_regions(self.world, cam1_pose,
                                             cfg.front_camera.K, regions1,
                                             cfg.front_camera.max_range)
                dI_c2 = camera_depth_regions(self.world, cam2_pose,
                                             cfg.rear_camera.K, regions2,
                                             cfg.rear_camera.max_range)

                # -- fusion + perception + control (the timed iteration)
                t_start = time.perf_counter()
                ri_virtual = interpolate_range_image(ri_native,
                                                     cfg.lidar.virtual_rows)
                cloud = range_to_cloud(ri_virtual)
                dI_l = project_cloud_to_depth(cloud, self.T_c1_lidar,
                                              cfg.front_camera.K)
                dfI = fuse_depth(dI_l, dI_c1, self.mask_bool)
                source = ("backward" if stage_now == Stage.BACKWARD
                          else "forward")
                dI_in = select_depth_source(source, dfI, dI_c2)

                det = self.detector.detect(self.world.box_center,
                                           self.world.box_extents,
                                           cam_pose, cam.K, t)
                if (self.trace_flags is not None
                        and tick < len(self.trace_flags)
                        and not self.trace_flags[tick]):
                    det = Detection(False)
            else:
                # no camera is assigned to the servo task while rotating, so
                # the fusion pipeline idles and only the kinematic loop runs
                t_start = time.perf_counter()
            detections.append((t, det))

            c = 0
            f = f_d = None
            feature_err = None
            Z_o = math.nan
            vs_out = Twist2(0.0, 0.0)
            if det.detected:
                cam, T_rc, adj, gains, placement = active
                try:
                    shrunk = shrink_bbox(det.bbox)
                    Z_o = object_depth(shrunk, dI_in)
                    est = localize(det.bbox.center(), Z_o, cam.K)
                    if cfg.range_depth_correction:
                        est = range_to_depth_correction(est)
                    self.target = update_target(est, T_wr_odom.compose(T_rc))
                    f = current_features(det.bbox)
                    if self.static_desired is not None:
                        f_d = self.static_desired
                    else:
                        f_d = desired_features(det.bbox, Z_o, placement, dI_in)
                    vs_out = robot_velocity_vs(
                        f, f_d, Z_o, cam.K, gains, adj,
                        self.odom_state.theta, cfg.vehicle, cfg.jr_mode)
                    feature_err = feature_error(f, f_d)
                    c = 1
                    if self.first_detection_tick is None:
                        self.first_detection_tick = tick
                except (NoValidDepth, EmptyBox, DegenerateFeatures,
                        SingularCombined, NonPositiveDepth):
                    c = 0
                    f = f_d = None
                    feature_err = None
                    Z_o = math.nan
                    vs_out = Twist2(0.0, 0.0)

            kin_target = self._kin_target()
            kin_out = None
            if kin_target is not None:
                cp = self.odom_state.control_point(cfg.vehicle.d)
                kin_out = robot_velocity_kin(
                    position_error(cp, kin_target), self.odom_state.theta,
                    cfg.vehicle, self._kin_gains())

            if self.first_detection_tick is None:
                if tick >= cfg.warmup_ticks:
                    raise FirstDetectionTimeout(
                        f"no detection in the first {cfg.warmup_ticks} ticks")
                gated = Twist2(0.0, 0.0)
                controller = "none"
            elif cfg.mode == "vs-only":
                gated = vs_out if c else Twist2(0.0, 0.0)
                controller = "vs" if c else "none"
            else:
                gated = hybrid_law(c, vs_out, kin_out)
                controller = "vs" if c else "kin"

            gated = clamp_twist(gated, cfg.vehicle)
            if cfg.smoothing:
                emitted = smooth(gated, self.prev_twist)
            else:
                emitted = gated
            self.prev_twist = emitted
            psi = steering_from_twist(emitted, cfg.vehicle)
            cmd = saturate(VehicleCommand(emitted.nu, psi), cfg.vehicle)
            if active is not None:
                # only full iterations (fusion + perception + control) count
                control_time += time.perf_counter() - t_start
                timed_ticks += 1

            log.append(self._record(tick, t, stage_now, c, controller, f, f_d,
                                    feature_err, cmd, emitted, kin_target, Z_o))

            self.true_state = integrate(self.true_state, cmd, cfg.dt,
                                        cfg.vehicle)
            self.odom_state = self._observe(self.true_state)

            pos_err = None
            if self.stage.stage == Stage.ROTATE and self.waypoint is not None:
                pos_err = position_error(
                    self.odom_state.control_point(cfg.vehicle.d), self.waypoint)
            new_stage = placement_step(self.stage, feature_err, pos_err,
                                       cfg.thresholds, tick + 1)
            if new_stage.stage != self.stage.stage:
                if new_stage.stage == Stage.ROTATE:
                    if cfg.task == "forward":
                        new_stage = PlacementState(Stage.DONE, tick + 1)
                    else:
                        self._enter_rotate(tick + 1)
                self.stage = new_stage
                if self.stage.stage == Stage.DONE:
                    break

        mean_ms = (1000.0 * control_time / timed_ticks) if timed_ticks else math.nan
        return RunResult(log, detections, self.stage.stage, mean_ms)

    def _record(self, tick, t, stage, c, controller, f, f_d, feature_err,
                cmd, emitted, kin_target, Z_o) -> LogRecord:
        nan = math.nan
        fvals = f.reshape(-1) if f is not None else [nan] * 8
        dvals = f_d.reshape(-1) if f_d is not None else [nan] * 8
        max_err = (float(np.abs(feature_err).max())
                   if feature_err is not None else nan)
        return LogRecord(
            tick=tick, t=t, state_id=int(stage), c=c, controller=controller,
            f_u0=fvals[0], f_v0=fvals[1], f_u1=fvals[2], f_v1=fvals[3],
            f_u2=fvals[4], f_v2=fvals[5], f_u3=fvals[6], f_v3=fvals[7],
            fd_u0=dvals[0], fd_v0=dvals[1], fd_u1=dvals[2], fd_v1=dvals[3],
            fd_u2=dvals[4], fd_v2=dvals[5], fd_u3=dvals[6], fd_v3=dvals[7],
            max_feature_err=max_err,
            nu_cmd=cmd.nu, psi_cmd=cmd.psi, omega_cmd=emitted.omega,
            X_odom=self.odom_state.X, Y_odom=self.odom_state.Y,
            theta_odom=self.odom_state.theta,
            X_true=self.true_state.X, Y_true=self.true_state.Y,
            theta_true=self.true_state.theta,
            X_d=kin_target.X if kin_target else nan,
            Y_d=kin_target.Y if kin_target else nan,
            Z_o=Z_o,
        )


def run_scenario(cfg: ScenarioConfig, trace=None) -> RunResult:
    """Execute one scenario; see ScenarioRunner for the loop semantics.

    ``trace`` replays the detected/missed schedule of a previous run (per
    tick index) on top of live geometry: a trace miss forces a miss, a
    trace hit keeps whatever the live detector produced.
    """
    return ScenarioRunner(cfg, trace=trace).run()


# ------------------------------------------------------------------ metrics


def compute_metrics(log, target, converged: bool = False,
                    iteration_time_mean_ms: float = math.nan) -> RunMetrics:
    """Final/windowed position errors and stop statistics for one log."""
    if not log:
        raise EmptyLog("cannot compute metrics for an empty log")
    tx, ty = float(target[0]), float(target[1])
    last = log[-1]
    window = max(1, int(round(0.1 * len(log))))
    tail = log[-window:]
    mse_x = float(np.mean([(r.X_true - tx) ** 2 for r in tail]))
    mse_y = float(np.mean([(r.Y_true - ty) ** 2 for r in tail]))
    zero_ticks = sum(1 for r in log
                     if abs(r.nu_cmd) < ZERO_VELOCITY_EPS
                     and r.state_id != int(Stage.DONE))
    return RunMetrics(
        final_err_x=last.X_true - tx,
        final_err_y=last.Y_true - ty,
        mse_x=mse_x,
        mse_y=mse_y,
        zero_velocity_ticks=zero_ticks,
        converged=converged,
        iteration_time_mean_ms=iteration_time_mean_ms,
    )


def zero_velocity_ticks_after_first_detection(log) -> int:
    """Stopped ticks (|nu| < eps) counted only after the first detection."""
    seen = False
    count = 0
    for r in log:
        if r.c:
            seen = True
        if seen and abs(r.nu_cmd) < ZERO_VELOCITY_EPS \
                and r.state_id != int(Stage.DONE):
            count += 1
    return count


def camera_twist_norms(log, cfg: ScenarioConfig) -> np.ndarray:
    """Per-tick norm of the 6D camera servo twist, recomputed from the log.

    Ticks without a detection give nan.  The camera and gains follow the
    logged stage (forward legs use the front camera, backward the rear).
    """
    out = np.full(len(log), math.nan)
    for i, r in enumerate(log):
        if not r.c or math.isnan(r.Z_o):
            continue
        if r.state_id == int(Stage.BACKWARD):
            K, gains = cfg.rear_camera.K, cfg.servo_rear
        else:
            K, gains = cfg.front_camera.K, cfg.servo_front
        try:
            v = camera_twist(r.features(), r.desired(), r.Z_o, K, gains)
        except DegenerateFeatures:
            continue
        out[i] = float(np.linalg.norm(v))
    return out


# ------------------------------------------------------------------- log io


def _format_value(name, value):
    if name in _STR_FIELDS:
        return value
    if name in _INT_FIELDS:
        return str(int(value))
    return f"{value:.9g}"


def write_log_csv(path, log) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(LOG_FIELDS)
        for rec in log:
            writer.writerow([_format_value(n, getattr(rec, n))
                             for n in LOG_FIELDS])


def read_log_csv(path) -> list:
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != LOG_FIELDS:
            raise ValueError(f"unexpected log header in {path}")
        for row in reader:
            kwargs = {}
            for name, text in zip(LOG_FIELDS, row):
                if name in _STR_FIELDS:
                    kwargs[name] = text
                elif name in _INT_FIELDS:
                    kwargs[name] = int(text)
                else:
                    kwargs[name] = float(text)
            out.append(LogRecord(**kwargs))
    return out


def write_metrics_text(path, metrics: RunMetrics) -> None:
    lines = [
        f"final_err_x = {metrics.final_err_x:.9g}",
        f"final_err_y = {metrics.final_err_y:.9g}",
        f"mse_x = {metrics.mse_x:.9g}",
        f"mse_y = {metrics.mse_y:.9g}",
        f"zero_velocity_ticks = {metrics.zero_velocity_ticks}",
        f"converged = {str(metrics.converged).lower()}",
        f"iteration_time_mean_ms = {metrics.iteration_time_mean_ms:.6g}",
    ]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
