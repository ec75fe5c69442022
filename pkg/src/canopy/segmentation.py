"""Ground-plane removal (RANSAC) and DBSCAN clustering.

Runs on the fused global map for label generation and on single frames for
the baseline detector. Clustering semantics: a point is core iff its closed
eps-ball, including the point itself, holds at least `min_samples` points;
clusters are connected components of core points plus reachable border
points. Border points reachable from several clusters go to the cluster
with the lowest id.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from canopy import _kernels
from canopy.errors import DegenerateInputError, InsufficientPointsError
from canopy.geometry import PointCloud

NOISE = -1

_UP_WORLD = np.array([0.0, 0.0, 1.0])


@dataclass
class Plane:
    """normal . p = offset, with the normal oriented toward `up`."""

    normal: np.ndarray
    offset: float
    inlier_count: int

    def signed_distance(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64)
        return points @ self.normal - self.offset


class ClusterSource(enum.Enum):
    AUTO = "auto"
    MANUAL = "manual"


@dataclass
class Cluster:
    """One tree candidate: a subset of the source cloud."""

    id: int
    point_indices: np.ndarray
    points: np.ndarray
    source: ClusterSource = ClusterSource.AUTO

    def __post_init__(self):
        self.point_indices = np.asarray(self.point_indices, dtype=np.int64)
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        if self.point_indices.size == 0:
            raise ValueError("cluster must contain at least one point")
        if np.unique(self.point_indices).size != self.point_indices.size:
            raise ValueError("cluster indices must be unique")

    @property
    def size(self) -> int:
        return int(self.point_indices.size)


def ransac_ground_plane(cloud: PointCloud, n_iters: int, dist_thresh: float,
                        seed: int, up: np.ndarray = _UP_WORLD) -> Plane:
    """Fit the dominant plane by RANSAC plus one least-squares refit.

    Deterministic for a given seed. `up` orients the returned normal
    (world +z for global maps, camera -y for single frames).
    """
    points = cloud.points
    n = points.shape[0]
    if n < 3:
        raise InsufficientPointsError(f"need >= 3 points for a plane, got {n}")
    if n_iters < 1 or dist_thresh <= 0:
        raise ValueError("n_iters >= 1 and dist_thresh > 0 required")

    rng = np.random.default_rng(seed)
    samples = np.empty((n_iters, 3), dtype=np.int64)
    for it in range(n_iters):
        samples[it] = rng.choice(n, size=3, replace=False)

    a = points[samples[:, 0]]
    edge1 = points[samples[:, 1]] - a
    edge2 = points[samples[:, 2]] - a
    normals = np.cross(edge1, edge2)
    norms = np.linalg.norm(normals, axis=1)
    scale = np.linalg.norm(edge1, axis=1) * np.linalg.norm(edge2, axis=1)
    ok = norms > 1e-12 * np.maximum(scale, 1e-300)
    if not np.any(ok):
        raise DegenerateInputError("all RANSAC samples were collinear")

    normals = normals[ok] / norms[ok, None]
    offsets = np.einsum("ij,ij->i", normals, a[ok])
    planes = np.concatenate([normals, offsets[:, None]], axis=1)

    counts = _kernels.plane_inlier_counts(points, planes, dist_thresh)
    best = int(np.argmax(counts))  # first of tied maxima: deterministic

    normal, offset = planes[best, :3], planes[best, 3]
    inliers = np.abs(points @ normal - offset) <= dist_thresh
    normal, offset = _least_squares_plane(points[inliers])

    up = np.asarray(up, dtype=np.float64)
    if float(normal @ up) < 0:
        normal, offset = -normal, -offset
    inlier_count = int(np.count_nonzero(np.abs(points @ normal - offset) <= dist_thresh))
    return Plane(normal, float(offset), inlier_count)


def _least_squares_plane(points: np.ndarray):
    centroid = points.mean(axis=0)
    _, _, vt = np.linalg.svd(points - centroid, full_matrices=False)
    normal = vt[2]
    return normal, float(normal @ centroid)


def remove_ground(cloud: PointCloud, plane: Plane, margin: float) -> PointCloud:
    """Keep only points strictly above the ground slab.

    Points below the plane are removed as well: sub-ground noise must not
    survive into clustering.
    """
    if margin <= 0:
        raise ValueError("margin must be positive")
    keep = plane.signed_distance(cloud.points) > margin
    return PointCloud(cloud.points[keep], cloud.frame)


def dbscan(cloud: PointCloud | np.ndarray, eps: float, min_samples: int) -> np.ndarray:
    """Cluster labels per point (>= 0) or NOISE (-1)."""
    if eps <= 0 or min_samples < 1:
        raise ValueError("eps > 0 and min_samples >= 1 required")
    points = cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud)
    n = points.shape[0]
    labels = np.full(n, NOISE, dtype=np.int64)
    if n == 0:
        return labels

    indptr, indices = _kernels.neighbor_csr(points, eps)
    # Neighbor CSR excludes the point itself; the closed ball includes it.
    core = (indptr[1:] - indptr[:-1]) + 1 >= min_samples

    cluster = 0
    for seed_idx in range(n):
        if not core[seed_idx] or labels[seed_idx] != NOISE:
            continue
        labels[seed_idx] = cluster
        frontier = np.array([seed_idx], dtype=np.int64)
        while frontier.size:
            reach = np.concatenate(
                [indices[indptr[p]:indptr[p + 1]] for p in frontier])
            reach = np.unique(reach)
            fresh = reach[labels[reach] == NOISE]
            labels[fresh] = cluster
            frontier = fresh[core[fresh]]
        cluster += 1
    return labels


def filter_clusters(labels: np.ndarray, cloud: PointCloud, p_min: int,
                    source: ClusterSource = ClusterSource.AUTO) -> list[Cluster]:
    """Drop clusters below the size threshold; re-id survivors densely from 0."""
    if p_min < 1:
        raise ValueError("p_min must be >= 1")
    labels = np.asarray(labels)
    clusters = []
    for label in np.unique(labels[labels >= 0]):
        idx = np.flatnonzero(labels == label)
        if idx.size >= p_min:
            clusters.append(Cluster(len(clusters), idx, cloud.points[idx], source))
    return clusters
