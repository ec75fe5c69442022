"""Multi-tree Kalman filter tracker with global-nearest-neighbor association.

Each tree is a constant state [x, y, w]: birds-eye-view position in the
world frame (x forward at the recording start, y left) plus trunk diameter.
The state transition and measurement matrices are both identity, so
prediction only inflates the covariance by the process noise. Measurements
come from detection boxes: the bottom-face center mapped to world BEV, and
the mean of the two horizontal box extents as the diameter. Association
minimizes Mahalanobis distance via the Hungarian algorithm, gated by a
chi-square quantile; unlikely pairings are discarded as clutter.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import chi2 as _chi2

from canopy.assignment import solve as solve_assignment
from canopy.config import RunConfig
from canopy.dataset import LabelRecord
from canopy.errors import NumericalError
from canopy.geometry import Box3, Pose, camera_frame, quat_to_matrix

logger = logging.getLogger(__name__)

_COND_LIMIT = 1e12


class TrackStatus(enum.Enum):
    TENTATIVE = "tentative"
    CONFIRMED = "confirmed"


@dataclass
class TrackState:
    id: int
    t: np.ndarray            # [x, y, w] world BEV state
    Sigma: np.ndarray        # 3x3 covariance
    hits: int = 1
    frames_since_update: int = 0
    status: TrackStatus = TrackStatus.TENTATIVE
    frames_outside_fov: int = 0

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=np.float64).reshape(3).copy()
        self.Sigma = np.asarray(self.Sigma, dtype=np.float64).reshape(3, 3).copy()

    def copy(self) -> "TrackState":
        return replace(self, t=self.t.copy(), Sigma=self.Sigma.copy())


@dataclass
class Measurement:
    d: np.ndarray            # [x, y, w] world BEV measurement
    source_box: Box3 | None = None

    def __post_init__(self):
        self.d = np.asarray(self.d, dtype=np.float64).reshape(3)
        if self.d[2] < 0:
            raise ValueError("measured diameter must be >= 0")


@dataclass
class TrackerConfig:
    Q: np.ndarray = field(default_factory=lambda: np.diag([1e-4, 1e-4, 1e-5]))
    R: np.ndarray = field(default_factory=lambda: np.diag([0.09, 0.09, 0.04]))
    gate_prob: float = 0.95
    min_hits: int = 3
    max_age: int = 100
    fov_exit_frames: int = 10
    max_range: float = 15.0
    h_fov_deg: float = 110.0

    def __post_init__(self):
        self.Q = np.asarray(self.Q, dtype=np.float64).reshape(3, 3)
        self.R = np.asarray(self.R, dtype=np.float64).reshape(3, 3)
        if not 0 < self.gate_prob < 1:
            raise ValueError("gate_prob must be in (0, 1)")

    @property
    def gate_threshold(self) -> float:
        return chi2_gate_threshold(3, self.gate_prob)

    @classmethod
    def from_config(cls, config: RunConfig) -> "TrackerConfig":
        return cls(
            Q=np.diag([config.tracker_q_pos, config.tracker_q_pos,
                       config.tracker_q_diam]),
            R=np.diag([config.tracker_r_pos, config.tracker_r_pos,
                       config.tracker_r_diam]),
            gate_prob=config.tracker_gate_prob,
            min_hits=config.tracker_min_hits,
            max_age=config.tracker_max_age,
            fov_exit_frames=config.tracker_fov_exit_frames,
            max_range=config.tracker_max_range,
            h_fov_deg=config.intrinsics().h_fov,
        )


# ------------------------------------------------------------- filter math

def predict(track: TrackState, Q: np.ndarray) -> TrackState:
    """Identity dynamics: state unchanged, covariance grows by Q."""
    out = track.copy()
    out.Sigma = out.Sigma + Q
    out.frames_since_update = track.frames_since_update + 1
    return out


def innovation(track: TrackState, meas: Measurement, R: np.ndarray):
    """Residual d - t and innovation covariance Sigma + R (H = identity)."""
    return meas.d - track.t, track.Sigma + R


def mahalanobis(residual: np.ndarray, S: np.ndarray) -> float:
    """Squared Mahalanobis distance residual^T S^-1 residual."""
    if np.linalg.cond(S) > _COND_LIMIT:
        raise NumericalError("innovation covariance is singular")
    return float(residual @ np.linalg.solve(S, residual))


def chi2_gate_threshold(dof: int, prob: float) -> float:
    """Inverse chi-square CDF; associations beyond it are discarded."""
    if dof < 1 or not 0 < prob < 1:
        raise ValueError("need dof >= 1 and 0 < prob < 1")
    return float(_chi2.ppf(prob, dof))


def update(track: TrackState, meas: Measurement, R: np.ndarray) -> TrackState:
    """Standard Kalman update in the symmetric (Joseph) form."""
    residual, S = innovation(track, meas, R)
    if np.linalg.cond(S) > _COND_LIMIT:
        raise NumericalError("innovation covariance is singular")
    K = np.linalg.solve(S.T, track.Sigma.T).T
    I_K = np.eye(3) - K
    Sigma = I_K @ track.Sigma @ I_K.T + K @ R @ K.T
    out = track.copy()
    out.t = track.t + K @ residual
    out.t[2] = max(out.t[2], 0.0)
    out.Sigma = (Sigma + Sigma.T) / 2.0
    out.hits = track.hits + 1
    out.frames_since_update = 0
    return out


# -------------------------------------------------------------- association

def assign(tracks: list[TrackState], measurements: list[Measurement],
           config: TrackerConfig):
    """GNN assignment on Mahalanobis cost with chi-square gating.

    Returns (matches, unmatched_track_idx, unmatched_meas_idx); matches are
    (track_idx, meas_idx, distance) triples. Tracks whose innovation
    covariance is unusable are left unmatched rather than aborting the frame.
    """
    n_t, n_m = len(tracks), len(measurements)
    cost = np.zeros((n_t, n_m))
    gated = np.zeros((n_t, n_m), dtype=bool)
    threshold = config.gate_threshold
    for i, track in enumerate(tracks):
        try:
            for j, meas in enumerate(measurements):
                residual, S = innovation(track, meas, config.R)
                cost[i, j] = mahalanobis(residual, S)
        except NumericalError:
            logger.warning("track %d: singular innovation covariance, "
                           "skipping association this frame", track.id)
            gated[i, :] = True
            continue
    gated |= cost > threshold
    pairs, unmatched_tracks, unmatched_meas = solve_assignment(cost, gated)
    matches = [(i, j, float(cost[i, j])) for i, j in pairs]
    return matches, unmatched_tracks, unmatched_meas


# ------------------------------------------------------------- measurements

def measurement_from_label(label: LabelRecord, pose: Pose) -> Measurement:
    """World-BEV measurement from a camera-frame detection box.

    Position is the bottom-face center of the box (camera +y is down)
    mapped through the pose; diameter is the mean of the two horizontal
    extents, which for upright trunks are the camera x and z extents.
    """
    bottom_center = label.center + np.array([0.0, label.extents[1] / 2.0, 0.0])
    world = pose.apply(bottom_center[None, :])[0]
    width = (label.extents[0] + label.extents[2]) / 2.0
    return Measurement(np.array([world[0], world[1], width]),
                       source_box=label.box(camera_frame(pose.frame_index)))


def camera_forward_bev(pose: Pose) -> np.ndarray:
    """Unit ground-plane projection of the camera's optical axis."""
    forward = quat_to_matrix(pose.rotation)[:, 2]
    norm = math.hypot(forward[0], forward[1])
    if norm < 1e-9:
        return np.zeros(2)
    return forward[:2] / norm


def is_outside_fov(t: np.ndarray, pose: Pose, config: TrackerConfig) -> bool:
    """BEV test: behind the camera, outside the horizontal cone, or too far."""
    delta = t[:2] - pose.translation[:2]
    rng = float(np.linalg.norm(delta))
    if rng > config.max_range:
        return True
    forward = camera_forward_bev(pose)
    if forward[0] == 0.0 and forward[1] == 0.0:
        return False  # camera looking straight up/down: no horizontal cone
    if rng < 1e-9:
        return False
    cos_bearing = float(delta @ forward) / rng
    return cos_bearing < math.cos(math.radians(config.h_fov_deg / 2.0))


# ------------------------------------------------------------------ tracker

class Tracker:
    """Sequential multi-tree estimator; one `step` call per frame."""

    def __init__(self, config: TrackerConfig):
        self.config = config
        self.tracks: list[TrackState] = []
        self.next_id = 0

    def step(self, detections: list[LabelRecord], pose: Pose) -> list[TrackState]:
        """Advance one frame; returns snapshots of the confirmed tracks."""
        cfg = self.config
        measurements = [measurement_from_label(det, pose) for det in detections]

        self.tracks = [predict(t, cfg.Q) for t in self.tracks]
        for track in self.tracks:
            if is_outside_fov(track.t, pose, cfg):
                track.frames_outside_fov += 1
            else:
                track.frames_outside_fov = 0

        matches, _, unmatched_meas = assign(self.tracks, measurements, cfg)
        for i, j, _ in matches:
            try:
                updated = update(self.tracks[i], measurements[j], cfg.R)
            except NumericalError:
                logger.warning("track %d: update failed, treating frame as "
                               "missed", self.tracks[i].id)
                continue
            updated.frames_outside_fov = 0
            self.tracks[i] = updated

        for j in unmatched_meas:
            d = measurements[j].d.copy()
            d[2] = max(d[2], 0.0)
            self.tracks.append(TrackState(self.next_id, d, 2.0 * cfg.R))
            self.next_id += 1

        for track in self.tracks:
            if track.status is TrackStatus.TENTATIVE and track.hits >= cfg.min_hits:
                track.status = TrackStatus.CONFIRMED

        self.tracks = [t for t in self.tracks
                       if t.frames_since_update < cfg.max_age
                       and t.frames_outside_fov < cfg.fov_exit_frames]

        return [t.copy() for t in self.tracks
                if t.status is TrackStatus.CONFIRMED]
