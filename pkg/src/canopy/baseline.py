"""Per-frame clustering baseline.

Runs the same ground-removal + DBSCAN procedure used for training-label
generation directly on a single noisy cloud and reports cluster bounding
boxes as detections. Ground-plane RANSAC runs far fewer iterations (the
per-frame ground patch is small), and the minimum cluster size is a
per-frame threshold instead of the global-map one.
"""

from __future__ import annotations

import logging

import numpy as np

from canopy.config import RunConfig
from canopy.dataset import CLASS_TREE, LabelRecord
from canopy.errors import DegenerateInputError, InsufficientPointsError
from canopy.geometry import PointCloud, fit_axis_aligned_box
from canopy.segmentation import (dbscan, filter_clusters, ransac_ground_plane,
                                 remove_ground)

logger = logging.getLogger(__name__)

# Camera frame looks along +z with +y down, so "up" is -y.
_UP_CAMERA = np.array([0.0, -1.0, 0.0])


def detect_frame(cloud: PointCloud, config: RunConfig,
                 seed: int = 0) -> list[LabelRecord]:
    """Detections for one camera-frame cloud; empty when no plane fits."""
    try:
        plane = ransac_ground_plane(cloud, config.baseline_ransac_iterations,
                                    config.ransac_distance_threshold, seed,
                                    up=_UP_CAMERA)
    except (InsufficientPointsError, DegenerateInputError):
        return []
    above = remove_ground(cloud, plane, config.ground_margin)
    labels = dbscan(above, config.dbscan_eps, config.dbscan_min_samples)
    clusters = filter_clusters(labels, above, config.baseline_min_cluster_points)
    detections = []
    for cluster in clusters:
        box = fit_axis_aligned_box(cluster.points, cloud.frame)
        detections.append(LabelRecord(CLASS_TREE, box.center, box.extents, 1.0))
    return detections
