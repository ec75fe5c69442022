"""Frames, rigid transforms, and box primitives shared by the whole pipeline.

Conventions:
- Camera frame: +x right, +y down, +z forward (optical convention).
- World frame: +z up. At frame 0 the world +x axis is the ground-plane
  projection of the camera's +z axis and +y points left.
- Quaternions are stored (w, x, y, z), Hamilton convention, camera-to-world.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from canopy.errors import EmptyInputError, FrameError

_QUAT_NORM_TOL = 1e-9


@dataclass(frozen=True)
class Frame:
    """Coordinate frame tag: the world frame or one camera frame."""

    kind: str
    index: int | None = None

    def __str__(self):
        if self.kind == "world":
            return "world"
        return f"camera[{self.index}]"


WORLD = Frame("world")


def camera_frame(frame_index: int) -> Frame:
    return Frame("camera", int(frame_index))


class Direction(enum.Enum):
    CAMERA_TO_WORLD = "camera_to_world"
    WORLD_TO_CAMERA = "world_to_camera"


def quat_normalize(q) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    n = math.sqrt(float(np.dot(q, q)))
    if n == 0.0:
        raise ValueError("zero quaternion")
    return q / n


def quat_to_matrix(q) -> np.ndarray:
    """Rotation matrix of a unit quaternion (w, x, y, z)."""
    w, x, y, z = q
    return np.array([
        [1 - 2 * y * y - 2 * z * z, 2 * x * y - 2 * w * z, 2 * x * z + 2 * w * y],
        [2 * x * y + 2 * w * z, 1 - 2 * x * x - 2 * z * z, 2 * y * z - 2 * w * x],
        [2 * x * z - 2 * w * y, 2 * y * z + 2 * w * x, 1 - 2 * x * x - 2 * y * y],
    ])


def matrix_to_quat(R) -> np.ndarray:
    """Quaternion (w, x, y, z) of a rotation matrix. Shepperd's method."""
    R = np.asarray(R, dtype=np.float64)
    trace = R[0, 0] + R[1, 1] + R[2, 2]
    if trace > 0:
        s = 0.5 / math.sqrt(trace + 1.0)
        w = 0.25 / s
        x = (R[2, 1] - R[1, 2]) * s
        y = (R[0, 2] - R[2, 0]) * s
        z = (R[1, 0] - R[0, 1]) * s
    elif R[0, 0] > R[1, 1] and R[0, 0] > R[2, 2]:
        s = 2.0 * math.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2])
        w = (R[2, 1] - R[1, 2]) / s
        x = 0.25 * s
        y = (R[0, 1] + R[1, 0]) / s
        z = (R[0, 2] + R[2, 0]) / s
    elif R[1, 1] > R[2, 2]:
        s = 2.0 * math.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2])
        w = (R[0, 2] - R[2, 0]) / s
        x = (R[0, 1] + R[1, 0]) / s
        y = 0.25 * s
        z = (R[1, 2] + R[2, 1]) / s
    else:
        s = 2.0 * math.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1])
        w = (R[1, 0] - R[0, 1]) / s
        x = (R[0, 2] + R[2, 0]) / s
        y = (R[1, 2] + R[2, 1]) / s
        z = 0.25 * s
    q = np.array([w, x, y, z])
    if q[0] < 0:
        q = -q
    return quat_normalize(q)


@dataclass
class Pose:
    """Rigid camera-to-world transform for one frame."""

    frame_index: int
    translation: np.ndarray
    rotation: np.ndarray  # unit quaternion (w, x, y, z), camera-to-world

    def __post_init__(self):
        self.translation = np.asarray(self.translation, dtype=np.float64).reshape(3)
        q = quat_normalize(np.asarray(self.rotation, dtype=np.float64).reshape(4))
        if q[0] < 0:  # canonical sign: q and -q are the same rotation
            q = -q
        self.rotation = q

    @property
    def matrix(self) -> np.ndarray:
        """4x4 homogeneous camera-to-world matrix."""
        T = np.eye(4)
        T[:3, :3] = quat_to_matrix(self.rotation)
        T[:3, 3] = self.translation
        return T

    def invert(self) -> "Pose":
        """The inverse rigid transform (world-to-camera), same frame index."""
        R = quat_to_matrix(self.rotation)
        return Pose(self.frame_index, -R.T @ self.translation, matrix_to_quat(R.T))

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Apply the camera-to-world transform to an (N, 3) array."""
        R = quat_to_matrix(self.rotation)
        return np.asarray(points, dtype=np.float64) @ R.T + self.translation

    def apply_inverse(self, points: np.ndarray) -> np.ndarray:
        """Apply the world-to-camera transform to an (N, 3) array."""
        R = quat_to_matrix(self.rotation)
        return (np.asarray(points, dtype=np.float64) - self.translation) @ R

    def camera_position(self) -> np.ndarray:
        return self.translation.copy()


def identity_pose(frame_index: int = 0) -> Pose:
    return Pose(frame_index, np.zeros(3), np.array([1.0, 0.0, 0.0, 0.0]))


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics; fields of view are derived, in degrees."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 < self.cx < self.width) or not (0 < self.cy < self.height):
            raise ValueError("principal point must lie inside the image")

    @property
    def h_fov(self) -> float:
        return math.degrees(2.0 * math.atan2(self.width / 2.0, self.fx))

    @property
    def v_fov(self) -> float:
        return math.degrees(2.0 * math.atan2(self.height / 2.0, self.fy))


@dataclass
class PointCloud:
    """Ordered 3-D points (meters) in a named frame."""

    points: np.ndarray
    frame: Frame = WORLD

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.size == 0:
            pts = pts.reshape(0, 3)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError(f"points must be (N, 3), got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points contain NaN or Inf")
        self.points = pts

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass
class Box3:
    """Axis-aligned 3-D box: center plus full side lengths."""

    center: np.ndarray
    extents: np.ndarray
    frame: Frame = WORLD

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=np.float64).reshape(3)
        self.extents = np.asarray(self.extents, dtype=np.float64).reshape(3)
        if np.any(self.extents < 0):
            raise ValueError("box extents must be non-negative")

    @property
    def min_corner(self) -> np.ndarray:
        return self.center - self.extents / 2.0

    @property
    def max_corner(self) -> np.ndarray:
        return self.center + self.extents / 2.0


def transform_cloud(pose: Pose, cloud: PointCloud, direction: Direction) -> PointCloud:
    """Rigidly transform a cloud between a camera frame and the world frame."""
    if direction is Direction.CAMERA_TO_WORLD:
        expected = camera_frame(pose.frame_index)
        if cloud.frame != expected:
            raise FrameError(f"expected cloud in {expected}, got {cloud.frame}")
        return PointCloud(pose.apply(cloud.points), WORLD)
    if cloud.frame != WORLD:
        raise FrameError(f"expected cloud in world frame, got {cloud.frame}")
    return PointCloud(pose.apply_inverse(cloud.points), camera_frame(pose.frame_index))


def fit_axis_aligned_box(points: np.ndarray, frame: Frame = WORLD) -> Box3:
    """Minimal axis-aligned box containing all points."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.size == 0:
        raise EmptyInputError("cannot fit a box to zero points")
    pts = pts.reshape(-1, 3)
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    return Box3((lo + hi) / 2.0, hi - lo, frame)


def points_in_box(cloud: PointCloud, box: Box3) -> np.ndarray:
    """Indices of cloud points inside the box, boundary inclusive."""
    if cloud.frame != box.frame:
        raise FrameError(f"cloud in {cloud.frame} but box in {box.frame}")
    if len(cloud) == 0:
        return np.zeros(0, dtype=np.int64)
    half = box.extents / 2.0
    inside = np.all(np.abs(cloud.points - box.center) <= half, axis=1)
    return np.flatnonzero(inside)
