"""Range-binned matching of estimated boxes against ground truth.

Matching is a minimum-total-distance linear assignment in camera birds-eye
view (lateral x, forward z), with pairs beyond the distance cutoff severed
into one false positive plus one false negative. Matched pairs contribute
absolute errors on forward position, lateral position, and diameter to the
bin of the ground-truth range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from canopy.assignment import solve as solve_assignment
from canopy.dataset import LabelRecord


def bev_position(record: LabelRecord) -> np.ndarray:
    """(lateral, forward) camera-frame ground-plane position of a box."""
    return np.array([record.center[0], record.center[2]])


def bev_range(record: LabelRecord) -> float:
    return float(math.hypot(record.center[0], record.center[2]))


def box_width(record: LabelRecord) -> float:
    """Diameter proxy: mean of the two horizontal extents."""
    return float((record.extents[0] + record.extents[2]) / 2.0)


@dataclass
class MatchResult:
    frame_index: int
    pairs: list[tuple[int, int, float]]  # (estimate idx, gt idx, BEV distance)
    false_positives: list[int]           # estimate indices
    false_negatives: list[int]           # gt indices


def match_frame(estimates: list[LabelRecord], ground_truth: list[LabelRecord],
                cutoff: float, frame_index: int = 0) -> MatchResult:
    """Hungarian matching in BEV with a hard distance cutoff."""
    n_e, n_g = len(estimates), len(ground_truth)
    cost = np.zeros((n_e, n_g))
    for i, est in enumerate(estimates):
        pe = bev_position(est)
        for j, gt in enumerate(ground_truth):
            cost[i, j] = float(np.linalg.norm(pe - bev_position(gt)))
    pairs, unmatched_e, unmatched_g = solve_assignment(cost, cost > cutoff)
    return MatchResult(frame_index,
                       [(i, j, float(cost[i, j])) for i, j in pairs],
                       unmatched_e, unmatched_g)


@dataclass
class RangeBinnedStats:
    bin_edges: np.ndarray
    tp: np.ndarray = field(init=False)
    fp: np.ndarray = field(init=False)
    fn: np.ndarray = field(init=False)
    err_x_sum: np.ndarray = field(init=False)  # forward-axis absolute error
    err_y_sum: np.ndarray = field(init=False)  # lateral-axis absolute error
    err_w_sum: np.ndarray = field(init=False)  # diameter absolute error

    def __post_init__(self):
        self.bin_edges = np.asarray(self.bin_edges, dtype=np.float64)
        n = len(self.bin_edges) - 1
        self.tp = np.zeros(n, dtype=np.int64)
        self.fp = np.zeros(n, dtype=np.int64)
        self.fn = np.zeros(n, dtype=np.int64)
        self.err_x_sum = np.zeros(n)
        self.err_y_sum = np.zeros(n)
        self.err_w_sum = np.zeros(n)

    @property
    def n_bins(self) -> int:
        return len(self.tp)

    def bin_of(self, rng: float) -> int:
        width = self.bin_edges[1] - self.bin_edges[0]
        return min(int(rng // width), self.n_bins - 1)

    def mae(self, which: str) -> np.ndarray:
        sums = {"x": self.err_x_sum, "y": self.err_y_sum, "w": self.err_w_sum}[which]
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.tp > 0, sums / self.tp, np.nan)

    def merge(self, other: "RangeBinnedStats") -> "RangeBinnedStats":
        if not np.array_equal(self.bin_edges, other.bin_edges):
            raise ValueError("cannot merge stats with different bins")
        self.tp += other.tp
        self.fp += other.fp
        self.fn += other.fn
        self.err_x_sum += other.err_x_sum
        self.err_y_sum += other.err_y_sum
        self.err_w_sum += other.err_w_sum
        return self

    def to_csv(self) -> str:
        lines = ["bin_lo,bin_hi,tp,fp,fn,mae_x,mae_y,mae_diameter"]
        mx, my, mw = self.mae("x"), self.mae("y"), self.mae("w")
        for b in range(self.n_bins):
            def fmt(v):
                return "" if np.isnan(v) else f"{v:.6f}"
            lines.append(f"{self.bin_edges[b]:.2f},{self.bin_edges[b+1]:.2f},"
                         f"{self.tp[b]},{self.fp[b]},{self.fn[b]},"
                         f"{fmt(mx[b])},{fmt(my[b])},{fmt(mw[b])}")
        return "\n".join(lines) + "\n"

    def summary(self) -> str:
        total_gt = int(self.tp.sum() + self.fn.sum())
        total_est = int(self.tp.sum() + self.fp.sum())
        return (f"matched {int(self.tp.sum())} of {total_gt} ground-truth boxes; "
                f"{int(self.fp.sum())} of {total_est} estimates unmatched")


def make_bins(bin_width: float, max_range: float) -> np.ndarray:
    n = max(1, int(math.ceil(max_range / bin_width - 1e-9)))
    return np.arange(n + 1, dtype=np.float64) * bin_width


def evaluate_frames(frames: list[tuple[int, list[LabelRecord], list[LabelRecord]]],
                    cutoff: float, bin_width: float, max_range: float):
    """Match and accumulate every (frame_index, estimates, gt) triple.

    Boxes at or beyond max_range are excluded from evaluation entirely, so
    per-bin counts always satisfy sum(tp)+sum(fn) == kept ground truth and
    sum(tp)+sum(fp) == kept estimates.
    """
    stats = RangeBinnedStats(make_bins(bin_width, max_range))
    results = []
    for frame_index, estimates, ground_truth in frames:
        estimates = [e for e in estimates if bev_range(e) < max_range]
        ground_truth = [g for g in ground_truth if bev_range(g) < max_range]
        result = match_frame(estimates, ground_truth, cutoff, frame_index)
        accumulate(stats, result, estimates, ground_truth)
        results.append(result)
    return stats, results


def accumulate(stats: RangeBinnedStats, result: MatchResult,
               estimates: list[LabelRecord],
               ground_truth: list[LabelRecord]) -> RangeBinnedStats:
    """Fold one frame's match result into the binned statistics."""
    for i, j, _ in result.pairs:
        est, gt = estimates[i], ground_truth[j]
        b = stats.bin_of(bev_range(gt))
        stats.tp[b] += 1
        stats.err_x_sum[b] += abs(est.center[2] - gt.center[2])
        stats.err_y_sum[b] += abs(est.center[0] - gt.center[0])
        stats.err_w_sum[b] += abs(box_width(est) - box_width(gt))
    for i in result.false_positives:
        stats.fp[stats.bin_of(bev_range(estimates[i]))] += 1
    for j in result.false_negatives:
        stats.fn[stats.bin_of(bev_range(ground_truth[j]))] += 1
    return stats
