# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernel backend.

Mirrors `canopy._kernels._python` operation for operation; the two backends
must stay interchangeable (same inputs, same outputs).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt, fabs

from canopy._kernels.grid import build_grid

cnp.import_array()

NAME = "native"

cdef double INF = float("inf")


cdef inline Py_ssize_t _bisect(const long long* keys, Py_ssize_t n,
                               long long k) noexcept nogil:
    cdef Py_ssize_t lo = 0, hi = n, mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if keys[mid] < k:
            lo = mid + 1
        else:
            hi = mid
    return lo


def neighbor_csr(points, double eps):
    """Adjacency of all point pairs within `eps` (closed ball, self excluded)."""
    points = np.ascontiguousarray(points, dtype=np.float64)
    cdef Py_ssize_t n = points.shape[0]
    indptr_arr = np.zeros(n + 1, dtype=np.int64)
    if n == 0:
        return indptr_arr, np.zeros(0, dtype=np.int32)

    grid = build_grid(points, eps)
    keys_arr = np.ascontiguousarray(grid.keys, dtype=np.int64)
    start_arr = np.ascontiguousarray(grid.cell_start, dtype=np.int64)
    count_arr = np.ascontiguousarray(grid.cell_count, dtype=np.int64)
    order_arr = np.ascontiguousarray(grid.order, dtype=np.int64)

    cdef double[:, ::1] pts = points
    cdef long long[::1] keys = keys_arr
    cdef long long[::1] cstart = start_arr
    cdef long long[::1] ccount = count_arr
    cdef long long[::1] order = order_arr
    cdef long long[::1] indptr = indptr_arr

    cdef Py_ssize_t n_cells = keys_arr.shape[0]
    cdef long long dims1 = int(grid.dims[1]), dims2 = int(grid.dims[2])

    # Neighbor-cell key offsets are constant across the grid.
    cdef long long[27] off
    cdef int da, db, dc, oi = 0
    for da in range(-1, 2):
        for db in range(-1, 2):
            for dc in range(-1, 2):
                off[oi] = (<long long>da * dims1 + db) * dims2 + dc
                oi += 1

    counts_arr = np.zeros(n, dtype=np.int64)
    cdef long long[::1] counts = counts_arr
    cdef double eps2 = eps * eps

    cdef Py_ssize_t u, k, r, s, i, j, pos
    cdef Py_ssize_t[27] nb_start
    cdef Py_ssize_t[27] nb_count
    cdef int n_nb
    cdef long long key, nb_key
    cdef double xi, yi, zi, dx, dy, dz, d2
    cdef const long long* keys_p = &keys[0]

    with nogil:
        for u in range(n_cells):
            key = keys[u]
            n_nb = 0
            for k in range(27):
                nb_key = key + off[k]
                pos = _bisect(keys_p, n_cells, nb_key)
                if pos < n_cells and keys_p[pos] == nb_key:
                    nb_start[n_nb] = cstart[pos]
                    nb_count[n_nb] = ccount[pos]
                    n_nb += 1
            for r in range(ccount[u]):
                i = order[cstart[u] + r]
                xi = pts[i, 0]
                yi = pts[i, 1]
                zi = pts[i, 2]
                for k in range(n_nb):
                    for s in range(nb_count[k]):
                        j = order[nb_start[k] + s]
                        if j == i:
                            continue
                        dx = xi - pts[j, 0]
                        d2 = dx * dx
                        dy = yi - pts[j, 1]
                        d2 += dy * dy
                        dz = zi - pts[j, 2]
                        d2 += dz * dz
                        if d2 <= eps2:
                            counts[i] += 1

    np.cumsum(counts_arr, out=indptr_arr[1:])
    indices_arr = np.zeros(indptr_arr[n], dtype=np.int32)
    if indptr_arr[n] == 0:
        return indptr_arr, indices_arr
    cdef int[::1] indices = indices_arr
    fill_arr = indptr_arr[:n].copy()
    cdef long long[::1] fill = fill_arr

    with nogil:
        for u in range(n_cells):
            key = keys[u]
            n_nb = 0
            for k in range(27):
                nb_key = key + off[k]
                pos = _bisect(keys_p, n_cells, nb_key)
                if pos < n_cells and keys_p[pos] == nb_key:
                    nb_start[n_nb] = cstart[pos]
                    nb_count[n_nb] = ccount[pos]
                    n_nb += 1
            for r in range(ccount[u]):
                i = order[cstart[u] + r]
                xi = pts[i, 0]
                yi = pts[i, 1]
                zi = pts[i, 2]
                for k in range(n_nb):
                    for s in range(nb_count[k]):
                        j = order[nb_start[k] + s]
                        if j == i:
                            continue
                        dx = xi - pts[j, 0]
                        d2 = dx * dx
                        dy = yi - pts[j, 1]
                        d2 += dy * dy
                        dz = zi - pts[j, 2]
                        d2 += dz * dz
                        if d2 <= eps2:
                            indices[fill[i]] = <int>j
                            fill[i] += 1

    return indptr_arr, indices_arr


def plane_inlier_counts(points, planes, double thresh):
    """Inlier counts for each candidate plane (nx, ny, nz, offset)."""
    points = np.ascontiguousarray(points, dtype=np.float64)
    planes = np.ascontiguousarray(planes, dtype=np.float64)
    counts_arr = np.zeros(planes.shape[0], dtype=np.int64)
    if points.shape[0] == 0:
        return counts_arr

    cdef double[:, ::1] pts = points
    cdef double[:, ::1] pls = planes
    cdef long long[::1] counts = counts_arr
    cdef Py_ssize_t n = points.shape[0], m_total = planes.shape[0]
    cdef Py_ssize_t m, i
    cdef double nx, ny, nz, d, dist
    cdef long long c

    with nogil:
        for m in range(m_total):
            nx = pls[m, 0]
            ny = pls[m, 1]
            nz = pls[m, 2]
            d = pls[m, 3]
            c = 0
            for i in range(n):
                dist = pts[i, 0] * nx + pts[i, 1] * ny + pts[i, 2] * nz - d
                if fabs(dist) <= thresh:
                    c += 1
            counts[m] = c
    return counts_arr


def cast_rays(origin, dirs, cylinders, ground):
    """Nearest-surface ray casting; see the python backend for the contract."""
    origin = np.asarray(origin, dtype=np.float64).reshape(3)
    dirs = np.ascontiguousarray(dirs, dtype=np.float64)
    cylinders = np.ascontiguousarray(
        np.asarray(cylinders, dtype=np.float64).reshape(-1, 5))
    ground = np.asarray(ground, dtype=np.float64).reshape(4)

    cdef Py_ssize_t n = dirs.shape[0], m_total = cylinders.shape[0]
    t_arr = np.zeros(n, dtype=np.float64)
    hit_arr = np.full(n, -1, dtype=np.int32)

    cdef double[:, ::1] d = dirs
    cdef double[:, ::1] cyl = cylinders
    cdef double[::1] t_out = t_arr
    cdef int[::1] hit = hit_arr
    cdef double ox = origin[0], oy = origin[1], oz = origin[2]
    cdef double gx0 = ground[0], gx1 = ground[1], gy0 = ground[2], gy1 = ground[3]
    cdef double tmin = 1e-9

    cdef Py_ssize_t i, m
    cdef double dx, dy, dz, t_best, tg, gx, gy
    cdef double a, b, c, disc, sq, t, z, cx, cy, r, z0, z1, fx, fy
    cdef int best

    with nogil:
        for i in range(n):
            dx = d[i, 0]
            dy = d[i, 1]
            dz = d[i, 2]
            t_best = INF
            best = -1

            if dz != 0.0:
                tg = (0.0 - oz) / dz
                if tg > tmin:
                    gx = ox + tg * dx
                    gy = oy + tg * dy
                    if gx0 <= gx <= gx1 and gy0 <= gy <= gy1 and tg < t_best:
                        t_best = tg
                        best = 0

            a = dx * dx + dy * dy
            if a > 0.0:
                for m in range(m_total):
                    cx = cyl[m, 0]
                    cy = cyl[m, 1]
                    r = cyl[m, 2]
                    z0 = cyl[m, 3]
                    z1 = cyl[m, 4]
                    fx = ox - cx
                    fy = oy - cy
                    b = 2.0 * (fx * dx + fy * dy)
                    c = fx * fx + fy * fy - r * r
                    disc = b * b - 4.0 * a * c
                    if disc < 0.0:
                        continue
                    sq = sqrt(disc)
                    t = (-b + -1.0 * sq) / (2.0 * a)
                    z = oz + t * dz
                    if t > tmin and z0 <= z <= z1 and t < t_best:
                        t_best = t
                        best = m + 1
                    t = (-b + 1.0 * sq) / (2.0 * a)
                    z = oz + t * dz
                    if t > tmin and z0 <= z <= z1 and t < t_best:
                        t_best = t
                        best = m + 1

            if best < 0:
                t_out[i] = 0.0
            else:
                t_out[i] = t_best
            hit[i] = best

    return t_arr, hit_arr
