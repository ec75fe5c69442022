"""Synthetic forest scenes with ground truth.

Generates vertical-cylinder trunks on a flat ground plane, a smooth camera
trajectory through them, and per-frame "stereo" clouds rendered by casting
a pixel-grid ray bundle. Depth noise follows the standard stereo error
propagation model sigma_z = z^2 * disparity_sigma / (focal * baseline), so
distortion grows quadratically with range like real stereo data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from canopy import _kernels
from canopy.config import RunConfig, write_config
from canopy.dataset import (DatasetLayout, LabelRecord, CLASS_TREE,
                            write_labels, write_point_cloud, write_trajectory)
from canopy.errors import PackingError, PathError
from canopy.geometry import (Box3, CameraIntrinsics, PointCloud, Pose, WORLD,
                             camera_frame, matrix_to_quat)

GLOBAL_MAP_VOXEL = 0.02  # m


@dataclass(frozen=True)
class SceneSpec:
    seed: int = 0
    n_trees: int = 20
    area_x: float = 20.0
    area_y: float = 14.0
    trunk_diameter: tuple[float, float] = (0.15, 0.6)
    trunk_height: tuple[float, float] = (2.0, 6.0)
    min_spacing: float = 1.0
    corridor_halfwidth: float = 1.2
    x_offset: float = 2.0     # forest starts this far ahead of the camera start
    ground_margin: float = 4.0

    @classmethod
    def from_config(cls, config: RunConfig, seed: int) -> "SceneSpec":
        return cls(seed=seed, n_trees=config.synth_n_trees,
                   area_x=config.synth_area_x, area_y=config.synth_area_y,
                   trunk_diameter=(config.synth_trunk_diameter_min,
                                   config.synth_trunk_diameter_max),
                   trunk_height=(config.synth_trunk_height_min,
                                 config.synth_trunk_height_max),
                   min_spacing=config.synth_min_spacing,
                   corridor_halfwidth=config.synth_corridor_halfwidth)


@dataclass(frozen=True)
class NoiseModel:
    disparity_sigma: float = 0.5  # px
    focal: float = 530.0          # px
    baseline: float = 0.12        # m
    lateral_sigma: float = 0.01   # m
    dropout_prob: float = 0.02

    def __post_init__(self):
        if min(self.disparity_sigma, self.lateral_sigma, self.dropout_prob) < 0:
            raise ValueError("noise parameters must be non-negative")
        if self.focal <= 0 or self.baseline <= 0:
            raise ValueError("focal and baseline must be positive")

    def sigma_z(self, z) -> np.ndarray:
        return np.asarray(z) ** 2 * self.disparity_sigma / (self.focal * self.baseline)

    @classmethod
    def from_config(cls, config: RunConfig) -> "NoiseModel":
        return cls(config.noise_disparity_sigma, config.noise_focal,
                   config.noise_baseline, config.noise_lateral_sigma,
                   config.noise_dropout)

    @classmethod
    def zero(cls) -> "NoiseModel":
        return cls(0.0, 530.0, 0.12, 0.0, 0.0)


@dataclass
class Scene:
    """Trunk cylinders (axis +z, base on the ground) over a ground rectangle."""

    centers: np.ndarray    # (N, 2) x, y
    diameters: np.ndarray  # (N,)
    heights: np.ndarray    # (N,)
    ground_rect: np.ndarray = field(
        default_factory=lambda: np.array([-5.0, 40.0, -12.0, 12.0]))

    def __post_init__(self):
        self.centers = np.asarray(self.centers, dtype=np.float64).reshape(-1, 2)
        self.diameters = np.asarray(self.diameters, dtype=np.float64).reshape(-1)
        self.heights = np.asarray(self.heights, dtype=np.float64).reshape(-1)

    @property
    def n_trees(self) -> int:
        return self.centers.shape[0]

    def cylinders(self) -> np.ndarray:
        """(N, 5) rows [cx, cy, radius, z_low, z_high] for the ray caster."""
        out = np.zeros((self.n_trees, 5))
        out[:, 0:2] = self.centers
        out[:, 2] = self.diameters / 2.0
        out[:, 4] = self.heights
        return out


def generate_scene(spec: SceneSpec) -> Scene:
    """Place trees by rejection sampling; deterministic under the seed."""
    rng = np.random.default_rng(spec.seed)
    x_lo, x_hi = spec.x_offset, spec.x_offset + spec.area_x
    y_half = spec.area_y / 2.0

    centers: list[np.ndarray] = []
    diameters: list[float] = []
    heights: list[float] = []
    attempts = 0
    while len(centers) < spec.n_trees:
        if attempts >= 10_000:
            raise PackingError(
                f"placed {len(centers)}/{spec.n_trees} trees in 10000 attempts; "
                "loosen spacing or enlarge the area")
        attempts += 1
        x = rng.uniform(x_lo, x_hi)
        y = rng.uniform(-y_half, y_half)
        d = rng.uniform(*spec.trunk_diameter)
        h = rng.uniform(*spec.trunk_height)
        if abs(y) - d / 2.0 < spec.corridor_halfwidth:
            continue
        if x < abs(y):
            # Keep the stand inside the wedge ahead of the recording start,
            # so every tree enters the camera's view at some point.
            continue
        p = np.array([x, y])
        if any(np.linalg.norm(p - q) < spec.min_spacing for q in centers):
            continue
        centers.append(p)
        diameters.append(d)
        heights.append(h)

    m = spec.ground_margin
    rect = np.array([x_lo - m - spec.x_offset, x_hi + m, -y_half - m, y_half + m])
    return Scene(np.array(centers).reshape(-1, 2), np.array(diameters),
                 np.array(heights), rect)


def yaw_pose(frame_index: int, position: np.ndarray, yaw: float) -> Pose:
    """Level camera pose: +z forward at world heading `yaw`, +y down."""
    s, c = math.sin(yaw), math.cos(yaw)
    rotation = np.array([
        [s, 0.0, c],
        [-c, 0.0, s],
        [0.0, -1.0, 0.0],
    ])
    return Pose(frame_index, position, matrix_to_quat(rotation))


def generate_trajectory(scene: Scene, n_frames: int, speed: float,
                        camera_height: float = 1.5, seed: int = 0) -> list[Pose]:
    """Smooth forward path with small heading wander; never hits a trunk."""
    if n_frames < 1:
        raise ValueError("n_frames must be >= 1")
    rng = np.random.default_rng(seed)
    poses = []
    position = np.array([0.0, 0.0, camera_height])
    yaw = 0.0
    wander = 0.0
    for k in range(n_frames):
        poses.append(yaw_pose(k, position.copy(), yaw))
        clearance = _trunk_clearance(scene, position[:2])
        if clearance < 0.2:
            raise PathError(f"camera path passes {clearance:.2f} m from a trunk "
                            f"at frame {k}")
        wander = 0.9 * wander + rng.normal(0.0, 0.004)
        # Steer softly back toward the corridor centerline.
        yaw = 0.12 * math.sin(2.0 * math.pi * k / 150.0) + wander - 0.05 * position[1]
        position = position + speed * np.array([math.cos(yaw), math.sin(yaw), 0.0])
    return poses


def _trunk_clearance(scene: Scene, xy: np.ndarray) -> float:
    if scene.n_trees == 0:
        return float("inf")
    d = np.linalg.norm(scene.centers - xy, axis=1) - scene.diameters / 2.0
    return float(d.min())


# ---------------------------------------------------------------- rendering

def _pixel_dirs(camera: CameraIntrinsics, stride: int) -> np.ndarray:
    """Camera-frame ray directions (z = 1) for every stride-th pixel center."""
    u = np.arange(0, camera.width, stride, dtype=np.float64) + 0.5
    v = np.arange(0, camera.height, stride, dtype=np.float64) + 0.5
    uu, vv = np.meshgrid(u, v)
    dirs = np.stack([(uu.ravel() - camera.cx) / camera.fx,
                     (vv.ravel() - camera.cy) / camera.fy,
                     np.ones(uu.size)], axis=1)
    return dirs


def _cast_frame(scene: Scene, pose: Pose, camera: CameraIntrinsics, stride: int):
    """Returns (depth t, hit id, camera-frame dirs) for hit rays only."""
    dirs_cam = _pixel_dirs(camera, stride)
    rotation = pose.matrix[:3, :3]
    dirs_world = dirs_cam @ rotation.T
    t, hit = _kernels.cast_rays(pose.translation, dirs_world,
                                scene.cylinders(), scene.ground_rect)
    mask = hit >= 0
    return t[mask], hit[mask], dirs_cam[mask]


def true_tree_box_camera(scene: Scene, tree: int, pose: Pose) -> Box3:
    """Exact camera-frame AABB of a trunk cylinder, via its support function."""
    radius = scene.diameters[tree] / 2.0
    half_h = scene.heights[tree] / 2.0
    mid_world = np.array([scene.centers[tree, 0], scene.centers[tree, 1], half_h])
    rotation = pose.matrix[:3, :3]
    center_cam = (mid_world - pose.translation) @ rotation
    axis_cam = rotation.T @ np.array([0.0, 0.0, 1.0])
    half = (half_h * np.abs(axis_cam)
            + radius * np.sqrt(np.maximum(0.0, 1.0 - axis_cam ** 2)))
    return Box3(center_cam, 2.0 * half, camera_frame(pose.frame_index))


def render_frame(scene: Scene, pose: Pose, camera: CameraIntrinsics,
                 noise: NoiseModel, pixel_stride: int = 1,
                 rng: np.random.Generator | None = None):
    """Render one frame.

    Returns (cloud, gt_labels): the noisy camera-frame cloud and the
    ground-truth boxes of trees with at least one rendered point inside.
    """
    cloud, gt, _ = _render_full(scene, pose, camera, noise, pixel_stride, rng)
    return cloud, gt


def _render_full(scene: Scene, pose: Pose, camera: CameraIntrinsics,
                 noise: NoiseModel, pixel_stride: int,
                 rng: np.random.Generator | None):
    if rng is None:
        rng = np.random.default_rng(0)
    t, hit, dirs_cam = _cast_frame(scene, pose, camera, pixel_stride)
    clean_cam = dirs_cam * t[:, None]

    depth = t.copy()  # dirs have z = 1, so the ray parameter is the depth
    if noise.disparity_sigma > 0:
        depth = depth + rng.normal(0.0, 1.0, depth.size) * noise.sigma_z(t)
    noisy_cam = dirs_cam * depth[:, None]
    if noise.lateral_sigma > 0:
        noisy_cam[:, 0] += rng.normal(0.0, noise.lateral_sigma, depth.size)
        noisy_cam[:, 1] += rng.normal(0.0, noise.lateral_sigma, depth.size)
    if noise.dropout_prob > 0:
        kept = rng.random(depth.size) >= noise.dropout_prob
        noisy_cam = noisy_cam[kept]

    cloud = PointCloud(noisy_cam, camera_frame(pose.frame_index))
    px, py, pz = noisy_cam[:, 0], noisy_cam[:, 1], noisy_cam[:, 2]
    gt = []
    for tree in range(scene.n_trees):
        box = true_tree_box_camera(scene, tree, pose)
        if _box_occupied(px, py, pz, box):
            gt.append(LabelRecord(CLASS_TREE, box.center, box.extents, 1.0))
    return cloud, gt, clean_cam


def _box_occupied(px, py, pz, box: Box3) -> bool:
    """True iff any point lies in the box; staged masks keep this cheap."""
    c = box.center
    h = box.extents / 2.0
    i = np.flatnonzero(np.abs(pz - c[2]) <= h[2])
    if i.size == 0:
        return False
    i = i[np.abs(px[i] - c[0]) <= h[0]]
    if i.size == 0:
        return False
    return bool(np.any(np.abs(py[i] - c[1]) <= h[1]))


# ------------------------------------------------------------------- export

class _VoxelAccumulator:
    """First-point-per-voxel downsampling over a known bounding region."""

    def __init__(self, bounds_lo, bounds_hi, voxel: float):
        self.voxel = voxel
        self.lo = np.asarray(bounds_lo, dtype=np.float64)
        dims = np.ceil((np.asarray(bounds_hi) - self.lo) / voxel).astype(np.int64) + 3
        self.dims = dims
        self.keys: list[np.ndarray] = []
        self.points: list[np.ndarray] = []

    def add(self, points: np.ndarray) -> None:
        if points.shape[0] == 0:
            return
        cells = np.floor((points - self.lo) / self.voxel).astype(np.int64)
        np.clip(cells, 0, self.dims - 1, out=cells)
        keys = (cells[:, 0] * self.dims[1] + cells[:, 1]) * self.dims[2] + cells[:, 2]
        _, first = np.unique(keys, return_index=True)
        first.sort()
        self.keys.append(keys[first])
        self.points.append(points[first])

    def result(self) -> np.ndarray:
        if not self.keys:
            return np.zeros((0, 3))
        keys = np.concatenate(self.keys)
        points = np.concatenate(self.points)
        _, first = np.unique(keys, return_index=True)
        first.sort()  # keep first-frame occurrence, in insertion order
        return points[first]


def export_dataset(scene: Scene, trajectory: list[Pose],
                   camera: CameraIntrinsics, noise: NoiseModel, out_dir,
                   config: RunConfig, seed: int = 0,
                   pixel_stride: int | None = None,
                   noisy_global_map: bool | None = None) -> DatasetLayout:
    """Write a complete dataset directory for the pipeline."""
    layout = DatasetLayout(out_dir)
    layout.root.mkdir(parents=True, exist_ok=True)
    stride = config.synth_pixel_stride if pixel_stride is None else pixel_stride
    if noisy_global_map is None:
        noisy_global_map = config.synth_noisy_global_map

    z_top = float(scene.heights.max()) + 2.0 if scene.n_trees else 3.0
    lo = np.array([scene.ground_rect[0], scene.ground_rect[2], -1.0])
    hi = np.array([scene.ground_rect[1], scene.ground_rect[3], z_top])
    accum = _VoxelAccumulator(lo, hi, GLOBAL_MAP_VOXEL)

    for pose in trajectory:
        rng = np.random.default_rng([seed, pose.frame_index])
        cloud, gt, clean_cam = _render_full(scene, pose, camera, noise,
                                            stride, rng)
        write_point_cloud(cloud, layout.frame_file(layout.clouds,
                                                   pose.frame_index, ".ply"))
        write_labels(gt, layout.frame_file(layout.gt_labels,
                                           pose.frame_index, ".txt"))
        fused_cam = cloud.points if noisy_global_map else clean_cam
        accum.add(pose.apply(fused_cam))

    write_trajectory(trajectory, layout.trajectory)
    write_point_cloud(PointCloud(accum.result(), WORLD), layout.global_map)
    write_config(config, layout.config)
    return layout
