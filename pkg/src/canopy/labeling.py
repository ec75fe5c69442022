"""Automatic training-label generation from global clusters.

For every frame: transform each world-frame cluster into the camera frame,
fit an axis-aligned box, and keep the box only if at least one point of the
frame's sparse cloud falls inside it and its nearest face is within sensing
range. Boxes are axis-aligned to the camera frame because trees have no
meaningful heading.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from canopy.config import RunConfig
from canopy.dataset import (CLASS_TREE, DatasetLayout, LabelRecord,
                            read_point_cloud, write_labels)
from canopy.errors import DataError
from canopy.geometry import (Box3, PointCloud, Pose, camera_frame,
                             fit_axis_aligned_box, points_in_box)
from canopy.segmentation import Cluster

logger = logging.getLogger(__name__)


@dataclass
class LabeledBox:
    box: Box3
    cluster_id: int

    def record(self) -> LabelRecord:
        return LabelRecord(CLASS_TREE, self.box.center, self.box.extents, 1.0)


@dataclass
class FrameLabelSet:
    frame_index: int
    boxes: list[LabeledBox]

    def records(self) -> list[LabelRecord]:
        return [b.record() for b in self.boxes]


def box_min_range(box: Box3) -> float:
    """Distance from the frame origin to the nearest face of the box."""
    gap = np.maximum(0.0, np.abs(box.center) - box.extents / 2.0)
    return float(np.linalg.norm(gap))


def generate_frame_labels(clusters: list[Cluster], pose: Pose,
                          local_cloud: PointCloud,
                          max_range: float) -> FrameLabelSet:
    """Per-frame label set for one sparse cloud."""
    frame = camera_frame(pose.frame_index)
    if local_cloud.frame != frame:
        raise DataError(f"local cloud frame {local_cloud.frame} does not match "
                        f"pose frame {frame}")
    boxes = []
    for cluster in clusters:
        pts_cam = pose.apply_inverse(cluster.points)
        box = fit_axis_aligned_box(pts_cam, frame)
        if box_min_range(box) > max_range:
            continue
        if points_in_box(local_cloud, box).size == 0:
            continue  # out of sensing range or fully occluded this frame
        boxes.append(LabeledBox(box, cluster.id))
    return FrameLabelSet(pose.frame_index, boxes)


def generate_dataset_labels(layout: DatasetLayout, clusters: list[Cluster],
                            trajectory: list[Pose], config: RunConfig) -> int:
    """Write labels/NNNNNN.txt for every sparse frame; returns box total."""
    poses = {p.frame_index: p for p in trajectory}
    frames = layout.frame_indices(layout.sparse, ".ply")
    if not frames:
        raise DataError(f"{layout.sparse}: no sparse clouds found "
                        "(run the sparsify stage first)")
    total = 0
    max_range = config.sparsifier_max_range
    for frame_index in frames:
        if frame_index not in poses:
            raise DataError(f"trajectory has no pose for frame {frame_index}")
        cloud = read_point_cloud(layout.frame_file(layout.sparse, frame_index, ".ply"),
                                 camera_frame(frame_index))
        labels = generate_frame_labels(clusters, poses[frame_index], cloud, max_range)
        write_labels(labels.records(),
                     layout.frame_file(layout.labels_dir, frame_index, ".txt"))
        total += len(labels.boxes)
    logger.info("labeled %d frames with %d boxes", len(frames), total)
    return total
