"""Minimum-cost assignment shared by the tracker and the evaluator.

Costs are solved on a square-padded matrix with a large finite sentinel in
forbidden cells; sentinel matches are filtered out afterwards, so a pair
past the gate stays unmatched even when it would complete a perfect
matching.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import linear_sum_assignment

SENTINEL = 1e12


def solve(cost: np.ndarray, forbidden: np.ndarray | None = None):
    """Optimal assignment of rows to columns.

    Returns (pairs, unmatched_rows, unmatched_cols) where pairs is a list of
    (row, col) kept matches in row order.
    """
    cost = np.asarray(cost, dtype=np.float64)
    n_rows, n_cols = cost.shape
    if n_rows == 0 or n_cols == 0:
        return [], list(range(n_rows)), list(range(n_cols))

    size = max(n_rows, n_cols)
    padded = np.full((size, size), SENTINEL)
    padded[:n_rows, :n_cols] = np.where(forbidden, SENTINEL, cost) \
        if forbidden is not None else cost
    rows, cols = linear_sum_assignment(padded)

    pairs = []
    matched_rows = set()
    matched_cols = set()
    for r, c in zip(rows, cols):
        if r >= n_rows or c >= n_cols or padded[r, c] >= SENTINEL:
            continue
        pairs.append((int(r), int(c)))
        matched_rows.add(int(r))
        matched_cols.add(int(c))
    unmatched_rows = [r for r in range(n_rows) if r not in matched_rows]
    unmatched_cols = [c for c in range(n_cols) if c not in matched_cols]
    return pairs, unmatched_rows, unmatched_cols
