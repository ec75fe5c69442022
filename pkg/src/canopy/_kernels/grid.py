"""Uniform voxel hash grid shared by both kernel backends.

Cells are packed into a single sorted int64 key per cell so that both the
numpy and the compiled backend walk exactly the same index structure and
therefore see exactly the same candidate sets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MAX_KEY = 1 << 62


@dataclass
class GridIndex:
    eps: float
    mins: np.ndarray        # (3,) int64 minimum cell coordinate, minus 1 of padding
    dims: np.ndarray        # (3,) int64 key strides domain (cells + 2 pad + 1)
    keys: np.ndarray        # (U,) int64, sorted ascending
    cell_start: np.ndarray  # (U,) int64 offsets into `order`
    cell_count: np.ndarray  # (U,) int64
    order: np.ndarray       # (N,) int64 point indices grouped by cell

    def pack(self, cells: np.ndarray) -> np.ndarray:
        """Pack (K, 3) integer cell coordinates into scalar keys."""
        a = cells[:, 0] - self.mins[0]
        b = cells[:, 1] - self.mins[1]
        c = cells[:, 2] - self.mins[2]
        return (a * self.dims[1] + b) * self.dims[2] + c


def build_grid(points: np.ndarray, eps: float) -> GridIndex:
    """Index points into cells of side `eps`."""
    points = np.ascontiguousarray(points, dtype=np.float64)
    n = points.shape[0]
    if n == 0:
        empty64 = np.zeros(0, dtype=np.int64)
        return GridIndex(eps, np.zeros(3, dtype=np.int64),
                         np.ones(3, dtype=np.int64), empty64, empty64,
                         empty64, empty64)
    cells = np.floor(points / eps).astype(np.int64)
    # Pad by one cell per side so neighbor offsets always pack collision-free.
    mins = cells.min(axis=0) - 1
    dims = cells.max(axis=0) - mins + 2
    if int(dims[0]) * int(dims[1]) * int(dims[2]) > _MAX_KEY:
        raise ValueError("point extent too large for this eps (cell key overflow)")

    grid = GridIndex(eps, mins, dims, None, None, None, None)
    point_keys = grid.pack(cells)
    order = np.argsort(point_keys, kind="stable")
    sorted_keys = point_keys[order]
    boundary = np.flatnonzero(np.diff(sorted_keys)) + 1
    starts = np.concatenate(([0], boundary))
    grid.keys = sorted_keys[starts]
    grid.cell_start = starts.astype(np.int64)
    grid.cell_count = np.diff(np.concatenate((starts, [n]))).astype(np.int64)
    grid.order = order.astype(np.int64)
    return grid


def neighbor_cell_ranges(grid: GridIndex, key: int):
    """(start, count) slices of the 27 cells around the cell with `key`."""
    dy = int(grid.dims[1])
    dz = int(grid.dims[2])
    out = []
    for da in (-1, 0, 1):
        for db in (-1, 0, 1):
            for dc in (-1, 0, 1):
                k = key + (da * dy + db) * dz + dc
                u = np.searchsorted(grid.keys, k)
                if u < len(grid.keys) and grid.keys[u] == k:
                    out.append((int(grid.cell_start[u]), int(grid.cell_count[u])))
    return out
