"""Pseudo-lidar sparsification of dense stereo-style clouds.

Points are binned by elevation into evenly spaced scan lines and by azimuth
into fixed-width cells; each occupied (line, azimuth) cell keeps its
nearest-range point, mimicking first-return lidar occlusion semantics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from canopy.config import RunConfig
from canopy.geometry import CameraIntrinsics, PointCloud


@dataclass(frozen=True)
class SparsifyParams:
    n_lines: int = 128
    elev_min_deg: float = -35.0
    elev_max_deg: float = 35.0
    azimuth_res_deg: float = 0.171875  # 2 * (110 deg / 1280 px)
    max_range: float = 15.0

    def __post_init__(self):
        if self.n_lines < 1:
            raise ValueError("n_lines must be >= 1")
        if self.elev_min_deg >= self.elev_max_deg:
            raise ValueError("elev_min_deg must be < elev_max_deg")
        if self.azimuth_res_deg <= 0:
            raise ValueError("azimuth_res_deg must be > 0")
        if self.max_range <= 0:
            raise ValueError("max_range must be > 0")

    @classmethod
    def from_config(cls, config: RunConfig) -> "SparsifyParams":
        return cls(config.sparsifier_n_lines, config.sparsifier_elev_min_deg,
                   config.sparsifier_elev_max_deg, config.azimuth_res_deg(),
                   config.sparsifier_max_range)

    @classmethod
    def for_camera(cls, camera: CameraIntrinsics, **kwargs) -> "SparsifyParams":
        kwargs.setdefault("azimuth_res_deg", 2.0 * camera.h_fov / camera.width)
        return cls(**kwargs)

    def line_centers_deg(self) -> np.ndarray:
        if self.n_lines == 1:
            return np.array([(self.elev_min_deg + self.elev_max_deg) / 2.0])
        return np.linspace(self.elev_min_deg, self.elev_max_deg, self.n_lines)


def sparsify(cloud: PointCloud, params: SparsifyParams) -> PointCloud:
    """Select one nearest point per (scan line, azimuth cell)."""
    indices = sparsify_indices(cloud.points, params)
    return PointCloud(cloud.points[indices], cloud.frame)


def sparsify_indices(points: np.ndarray, params: SparsifyParams) -> np.ndarray:
    """Input indices of the selected points, ascending."""
    points = np.asarray(points, dtype=np.float64)
    if points.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)
    x, y, z = points[:, 0], points[:, 1], points[:, 2]
    # Camera frame has +y down, so elevation above the optical axis uses -y.
    horiz = np.sqrt(x * x + z * z)
    elev = np.degrees(np.arctan2(-y, horiz))
    azim = np.degrees(np.arctan2(x, z))
    rng = np.sqrt(x * x + y * y + z * z)

    keep = (elev >= params.elev_min_deg) & (elev <= params.elev_max_deg)
    keep &= rng <= params.max_range
    idx = np.flatnonzero(keep)
    if idx.size == 0:
        return idx

    if params.n_lines == 1:
        line = np.zeros(idx.size, dtype=np.int64)
    else:
        spacing = (params.elev_max_deg - params.elev_min_deg) / (params.n_lines - 1)
        line = np.rint((elev[idx] - params.elev_min_deg) / spacing).astype(np.int64)
        np.clip(line, 0, params.n_lines - 1, out=line)
    cell = np.floor(azim[idx] / params.azimuth_res_deg).astype(np.int64)

    # Group by (line, cell); within a group order by range then input index,
    # and keep the first entry of each group.
    order = np.lexsort((idx, rng[idx], cell, line))
    line_s, cell_s, idx_s = line[order], cell[order], idx[order]
    first = np.ones(order.size, dtype=bool)
    first[1:] = (line_s[1:] != line_s[:-1]) | (cell_s[1:] != cell_s[:-1])
    return np.sort(idx_s[first])
