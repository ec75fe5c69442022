"""Pure numpy kernel backend.

Semantically identical to the compiled backend in `_native.pyx`; every
formula is written with the same elementwise operation order so results
match bit for bit where floating point allows.
"""

from __future__ import annotations

import numpy as np

from canopy._kernels.grid import build_grid, neighbor_cell_ranges

NAME = "python"


def neighbor_csr(points: np.ndarray, eps: float):
    """Adjacency of all point pairs within `eps` (closed ball, self excluded).

    Returns (indptr, indices) in CSR layout; row i holds the neighbors of
    point i in unspecified order.
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    n = points.shape[0]
    indptr = np.zeros(n + 1, dtype=np.int64)
    if n == 0:
        return indptr, np.zeros(0, dtype=np.int32)
    grid = build_grid(points, eps)
    eps2 = eps * eps
    px, py, pz = points[:, 0], points[:, 1], points[:, 2]

    rows: list[np.ndarray | None] = [None] * n
    for u in range(len(grid.keys)):
        own = grid.order[grid.cell_start[u]:grid.cell_start[u] + grid.cell_count[u]]
        cand_slices = neighbor_cell_ranges(grid, int(grid.keys[u]))
        cand = np.concatenate([grid.order[s:s + c] for s, c in cand_slices])
        dx = px[own][:, None] - px[cand][None, :]
        d2 = dx * dx
        dy = py[own][:, None] - py[cand][None, :]
        d2 += dy * dy
        dz = pz[own][:, None] - pz[cand][None, :]
        d2 += dz * dz
        mask = d2 <= eps2
        mask &= own[:, None] != cand[None, :]
        for r, i in enumerate(own):
            rows[i] = cand[mask[r]]

    counts = np.fromiter((len(r) for r in rows), dtype=np.int64, count=n)
    np.cumsum(counts, out=indptr[1:])
    if indptr[-1] == 0:
        return indptr, np.zeros(0, dtype=np.int32)
    indices = np.concatenate(rows).astype(np.int32)
    return indptr, indices


def plane_inlier_counts(points: np.ndarray, planes: np.ndarray,
                        thresh: float) -> np.ndarray:
    """Inlier counts for each candidate plane (nx, ny, nz, offset)."""
    points = np.ascontiguousarray(points, dtype=np.float64)
    planes = np.ascontiguousarray(planes, dtype=np.float64)
    counts = np.zeros(planes.shape[0], dtype=np.int64)
    if points.shape[0] == 0:
        return counts
    px, py, pz = points[:, 0], points[:, 1], points[:, 2]
    for m in range(planes.shape[0]):
        nx, ny, nz, d = planes[m]
        dist = px * nx
        dist += py * ny
        dist += pz * nz
        dist -= d
        counts[m] = int(np.count_nonzero(np.abs(dist) <= thresh))
    return counts


def cast_rays(origin: np.ndarray, dirs: np.ndarray, cylinders: np.ndarray,
              ground: np.ndarray):
    """Nearest-surface ray casting against a ground rectangle and cylinders.

    origin: (3,) world-frame ray origin shared by all rays.
    dirs: (N, 3) world-frame ray directions (need not be unit length).
    cylinders: (M, 5) rows [cx, cy, radius, z_low, z_high], axis along +z.
    ground: [xmin, xmax, ymin, ymax] rectangle in the z=0 plane.

    Returns (t, hit): ray parameters and surface ids, -1 = miss,
    0 = ground, m+1 = cylinder m. Ties go to the lower id.
    """
    origin = np.asarray(origin, dtype=np.float64).reshape(3)
    dirs = np.ascontiguousarray(dirs, dtype=np.float64)
    cylinders = np.ascontiguousarray(cylinders, dtype=np.float64).reshape(-1, 5)
    n = dirs.shape[0]
    t_best = np.full(n, np.inf)
    hit = np.full(n, -1, dtype=np.int32)
    ox, oy, oz = origin
    dx, dy, dz = dirs[:, 0], dirs[:, 1], dirs[:, 2]
    tmin = 1e-9

    with np.errstate(divide="ignore", invalid="ignore"):
        tg = (0.0 - oz) / dz
        gx = ox + tg * dx
        gy = oy + tg * dy
        ok = (dz != 0.0) & (tg > tmin)
        ok &= (gx >= ground[0]) & (gx <= ground[1])
        ok &= (gy >= ground[2]) & (gy <= ground[3])
        better = ok & (tg < t_best)
        t_best[better] = tg[better]
        hit[better] = 0

        a = dx * dx + dy * dy
        for m in range(cylinders.shape[0]):
            cx, cy, r, z0, z1 = cylinders[m]
            fx = ox - cx
            fy = oy - cy
            b = 2.0 * (fx * dx + fy * dy)
            c = fx * fx + fy * fy - r * r
            disc = b * b - 4.0 * a * c
            valid = (disc >= 0.0) & (a > 0.0)
            sq = np.sqrt(np.where(valid, disc, 0.0))
            for sign in (-1.0, 1.0):
                t = (-b + sign * sq) / (2.0 * a)
                z = oz + t * dz
                ok = valid & (t > tmin) & (z >= z0) & (z <= z1)
                better = ok & (t < t_best)
                t_best[better] = t[better]
                hit[better] = m + 1

    t_best[hit < 0] = 0.0
    return t_best, hit
