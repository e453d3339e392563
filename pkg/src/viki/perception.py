"""Synthetic object detection and bounding-box based 3D localization.

The detector stands in for a neural detector: it projects the target's
3D box into the camera, takes the axis-aligned hull, perturbs each edge
with Gaussian pixel noise, and fails on schedule (occlusion windows) or
at random (per-frame miss probability) from a seeded stream.  Object
class is ignored: any detection is the target.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np

from .camera import CameraIntrinsics, project_points
from .errors import EmptyBox, NonPositiveDepth, NoValidDepth
from .geometry import RigidTransform, transform_points


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned pixel box; (u0, v0) is the low corner, (u2, v2) the high."""

    u0: float
    v0: float
    u2: float
    v2: float

    def __post_init__(self):
        if not (self.u0 < self.u2 and self.v0 < self.v2):
            raise EmptyBox(f"degenerate box {self}")

    @property
    def width(self) -> float:
        return self.u2 - self.u0

    @property
    def height(self) -> float:
        return self.v2 - self.v0

    def center(self) -> np.ndarray:
        return np.array([(self.u0 + self.u2) / 2.0, (self.v0 + self.v2) / 2.0])

    def corners(self) -> np.ndarray:
        """The 4 corners in fixed order: low-low, low-high, high-high, high-low."""
        return np.array([
            [self.u0, self.v0],
            [self.u0, self.v2],
            [self.u2, self.v2],
            [self.u2, self.v0],
        ])


@dataclass(frozen=True)
class Detection:
    detected: bool
    bbox: BoundingBox | None = None


@dataclass(frozen=True)
class ObjectEstimate:
    """Estimated object position in the camera frame."""

    position: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.position, dtype=float).reshape(3)
        if p[2] <= 0:
            raise NonPositiveDepth(f"estimated depth {p[2]} is not positive")
        object.__setattr__(self, "position", p)


@dataclass(frozen=True)
class DetectorModel:
    p_miss: float = 0.0
    pixel_noise: float = 0.0
    occlusion_intervals: tuple = ()
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.p_miss <= 1.0:
            raise ValueError("p_miss must be in [0, 1]")


class SyntheticDetector:
    """Stateful detector owning one seeded random stream.

    Every call consumes the same number of random draws regardless of the
    outcome, so two runs with the same seed see identical miss/noise
    schedules even when their trajectories diverge.
    """

    def __init__(self, model: DetectorModel):
        self.model = model
        self.rng = np.random.default_rng(model.rng_seed)

    def detect(self, object_center_world, object_extents, camera_pose_world:
               RigidTransform, K: CameraIntrinsics, t: float) -> Detection:
        miss_draw = self.rng.uniform()
        noise = self.rng.normal(0.0, 1.0, 4) * self.model.pixel_noise

        center = np.asarray(object_center_world, dtype=float).reshape(3)
        ex, ey, ez = np.asarray(object_extents, dtype=float).reshape(3) / 2.0
        offsets = np.array([[sx, sy, sz] for sx in (-ex, ex)
                            for sy in (-ey, ey) for sz in (-ez, ez)])
        world_corners = center + offsets
        cam = transform_points(camera_pose_world.inverse(), world_corners)
        center_cam = transform_points(camera_pose_world.inverse(),
                                      center[None, :])[0]
        if center_cam[2] <= 0 or np.any(cam[:, 2] <= 0):
            return Detection(False)

        pixels, _ = project_points(cam, K)
        u_min, v_min = pixels.min(axis=0)
        u_max, v_max = pixels.max(axis=0)
        if u_max <= 0 or v_max <= 0 or u_min >= K.width or v_min >= K.height:
            return Detection(False)

        for start, end in self.model.occlusion_intervals:
            if start <= t <= end:
                return Detection(False)
        if miss_draw < self.model.p_miss:
            return Detection(False)

        u_min = np.clip(u_min + noise[0], 0.0, K.width - 1e-6)
        v_min = np.clip(v_min + noise[1], 0.0, K.height - 1e-6)
        u_max = np.clip(u_max + noise[2], 0.0, K.width - 1e-6)
        v_max = np.clip(v_max + noise[3], 0.0, K.height - 1e-6)
        if u_min >= u_max or v_min >= v_max:
            return Detection(False)
        return Detection(True, BoundingBox(u_min, v_min, u_max, v_max))


def shrink_bbox(bb: BoundingBox) -> BoundingBox:
    """Inset a box by 20% of its span on every side (40% smaller overall).

    Edges are rounded half-to-even to integer pixel coordinates.
    """
    u_min = round(0.4 * (0.5 * (bb.u2 - bb.u0)) + bb.u0)
    u_max = round(0.4 * (0.5 * (bb.u0 - bb.u2)) + bb.u2)
    v_min = round(0.4 * (0.5 * (bb.v2 - bb.v0)) + bb.v0)
    v_max = round(0.4 * (0.5 * (bb.v0 - bb.v2)) + bb.v2)
    if u_min >= u_max or v_min >= v_max:
        raise EmptyBox("box collapsed after shrinking")
    return BoundingBox(float(u_min), float(v_min), float(u_max), float(v_max))


def object_depth(bb: BoundingBox, dI_in: np.ndarray) -> float:
    """Average the known (nonzero) depths inside an integer pixel box.

    The pixel range is inclusive on both ends.  Raises NoValidDepth when
    every cell in the region is unknown.
    """
    h, w = dI_in.shape
    u0 = max(0, int(bb.u0))
    v0 = max(0, int(bb.v0))
    u1 = min(w - 1, int(bb.u2))
    v1 = min(h - 1, int(bb.v2))
    if u1 < u0 or v1 < v0:
        raise NoValidDepth("depth region lies outside the image")
    region = dI_in[v0:v1 + 1, u0:u1 + 1]
    vals = region[region != 0].astype(np.float64)
    if vals.size == 0:
        raise NoValidDepth("no known depth inside the box")
    return float(vals.sum() / vals.size)


def localize(center_pixel, d_o: float, K: CameraIntrinsics) -> ObjectEstimate:
    """Back-project the bbox center at the averaged depth (camera frame)."""
    if d_o <= 0:
        raise NonPositiveDepth(f"object depth {d_o} is not positive")
    ou, ov = np.asarray(center_pixel, dtype=float).reshape(2)
    return ObjectEstimate(np.array([
        (ou - K.uc) * d_o / K.lu,
        (ov - K.vc) * d_o / K.lv,
        d_o,
    ]))


def range_to_depth_correction(est: ObjectEstimate) -> ObjectEstimate:
    """Rescale an estimate so its norm, not its Z, equals the measured range.

    The averaged depth is a Euclidean range; treating it directly as Z
    overestimates the position by the ray obliquity.  Optional: off by
    default to match the uncorrected pipeline.
    """
    p = est.position
    scale = p[2] / math.sqrt(float(p @ p))
    return ObjectEstimate(p * scale)


def write_detection_trace(path, rows) -> None:
    """Save per-tick detections as CSV rows "t,detected,u0,v0,u2,v2"."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["t", "detected", "u0", "v0", "u2", "v2"])
        for t, det in rows:
            if det.detected:
                b = det.bbox
                writer.writerow([f"{t:.9g}", 1, f"{b.u0:.9g}", f"{b.v0:.9g}",
                                 f"{b.u2:.9g}", f"{b.v2:.9g}"])
            else:
                writer.writerow([f"{t:.9g}", 0, "nan", "nan", "nan", "nan"])


def read_detection_trace(path):
    """Load a detection trace; returns a list of (t, Detection)."""
    out = []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        if header[:2] != ["t", "detected"]:
            raise ValueError(f"unexpected trace header: {header}")
        for row in reader:
            t = float(row[0])
            if int(row[1]):
                u0, v0, u2, v2 = (float(x) for x in row[2:6])
                out.append((t, Detection(True, BoundingBox(u0, v0, u2, v2))))
            else:
                out.append((t, Detection(False)))
    return out
