import numpy as np
import pytest

from canopy.dataset import LabelRecord
from canopy.errors import NumericalError
from canopy.synth import yaw_pose
from canopy.tracking import (Measurement, Tracker, TrackerConfig, TrackState,
                             TrackStatus, assign, chi2_gate_threshold,
                             innovation, is_outside_fov, mahalanobis,
                             measurement_from_label, predict, update)

from conftest import rng_for
from reference_impls import (brute_force_assignment, chi2_ppf_bisection,
                             solve3_gaussian)


def make_track(t=(0, 0, 0.4), sigma=None, **kwargs) -> TrackState:
    sigma = np.eye(3) if sigma is None else sigma
    return TrackState(0, np.array(t, dtype=float), sigma, **kwargs)


def meas(d) -> Measurement:
    return Measurement(np.array(d, dtype=float))


def random_spd(rng, scale=1.0) -> np.ndarray:
    A = rng.normal(size=(3, 3))
    return A @ A.T * scale + np.eye(3) * 1e-3


class TestPredict:
    def test_zero_q_keeps_sigma(self):
        track = make_track()
        out = predict(track, np.zeros((3, 3)))
        assert np.array_equal(out.Sigma, track.Sigma)
        assert np.array_equal(out.t, track.t)
        assert out.frames_since_update == 1

    def test_diagonal_growth(self):
        q = np.diag([0.1, 0.2, 0.3])
        out = predict(make_track(), q)
        assert np.allclose(np.diag(out.Sigma), [1.1, 1.2, 1.3])

    def test_trace_growth_closed_form(self):
        q = np.diag([1e-4, 1e-4, 1e-5])
        track = make_track()
        start = np.trace(track.Sigma)
        for _ in range(10):
            track = predict(track, q)
        assert np.trace(track.Sigma) == pytest.approx(start + 10 * np.trace(q),
                                                      abs=1e-12)


class TestInnovation:
    def test_zero_residual(self):
        track = make_track(t=(1, 2, 0.5))
        residual, _ = innovation(track, meas((1, 2, 0.5)), np.eye(3))
        assert np.allclose(residual, 0)

    def test_identity_sum(self):
        residual, S = innovation(make_track(), meas((1, 0, 0)), np.eye(3))
        assert np.allclose(S, 2 * np.eye(3))

    def test_random_psd(self):
        rng = rng_for("innovation-psd")
        for _ in range(50):
            track = make_track(sigma=random_spd(rng))
            _, S = innovation(track, meas(rng.normal(size=3) + [0, 0, 5]),
                              random_spd(rng))
            assert np.allclose(S, S.T)
            assert np.linalg.eigvalsh(S).min() > 0


class TestMahalanobis:
    def test_identity(self):
        assert mahalanobis(np.array([1.0, 0, 0]), np.eye(3)) == pytest.approx(1.0)

    def test_diagonal(self):
        S = np.diag([4.0, 1.0, 1.0])
        assert mahalanobis(np.array([2.0, 0, 0]), S) == pytest.approx(1.0)

    def test_matches_gaussian_elimination_oracle(self):
        rng = rng_for("mahalanobis-oracle")
        for _ in range(100):
            S = random_spd(rng)
            r = rng.normal(size=3)
            expected = float(r @ solve3_gaussian(S, r))
            assert mahalanobis(r, S) == pytest.approx(expected, abs=1e-9)

    def test_singular_raises(self):
        S = np.zeros((3, 3))
        S[0, 0] = 1.0
        with pytest.raises(NumericalError):
            mahalanobis(np.ones(3), S)


class TestChi2Gate:
    def test_three_dof_95(self):
        assert chi2_gate_threshold(3, 0.95) == pytest.approx(7.8147, abs=1e-3)
        assert chi2_gate_threshold(3, 0.95) == pytest.approx(
            chi2_ppf_bisection(3, 0.95), abs=1e-6)

    def test_one_dof_95(self):
        assert chi2_gate_threshold(1, 0.95) == pytest.approx(3.8415, abs=1e-3)

    def test_limit_to_zero(self):
        assert chi2_gate_threshold(3, 1e-12) < 1e-3

    def test_matches_bisection_oracle_broadly(self):
        for dof in (1, 2, 3, 5):
            for prob in (0.5, 0.9, 0.99):
                assert chi2_gate_threshold(dof, prob) == pytest.approx(
                    chi2_ppf_bisection(dof, prob), rel=1e-6)


class TestUpdate:
    def test_symmetric_case_midpoint(self):
        track = make_track(t=(0, 0, 0))
        out = update(track, meas((2, 0, 0.4)), np.eye(3))
        assert np.allclose(out.t, [1, 0, 0.2])
        assert np.allclose(out.Sigma, 0.5 * np.eye(3))
        assert out.hits == 2
        assert out.frames_since_update == 0

    def test_tiny_r_pulls_to_measurement(self):
        track = make_track(t=(0, 0, 0))
        out = update(track, meas((3, -1, 0.5)), np.eye(3) * 1e-12)
        assert np.allclose(out.t, [3, -1, 0.5], atol=1e-9)

    def test_trace_decreases(self):
        rng = rng_for("update-trace")
        for _ in range(100):
            track = make_track(sigma=random_spd(rng))
            R = random_spd(rng)
            d = rng.normal(size=3)
            d[2] = abs(d[2])
            out = update(track, meas(d), R)
            assert np.trace(out.Sigma) < np.trace(track.Sigma)

    def test_diameter_clipped_non_negative(self):
        track = make_track(t=(0, 0, 0.01), sigma=np.eye(3) * 10)
        out = update(track, meas((0, 0, 0.0)), np.eye(3) * 1e-6)
        assert out.t[2] >= 0


class TestAssign:
    CFG = TrackerConfig()

    def test_two_by_two(self):
        tracks = [make_track(t=(0, 0, 0.4)), make_track(t=(5, 0, 0.4))]
        ms = [meas((0.1, 0, 0.4)), meas((5.1, 0, 0.4))]
        matches, ut, um = assign(tracks, ms, self.CFG)
        assert sorted((i, j) for i, j, _ in matches) == [(0, 0), (1, 1)]
        assert ut == [] and um == []

    def test_all_gated(self):
        tracks = [make_track(t=(0, 0, 0.4), sigma=np.eye(3) * 1e-4)]
        ms = [meas((50, 50, 0.4))]
        cfg = TrackerConfig(R=np.eye(3) * 1e-4)
        matches, ut, um = assign(tracks, ms, cfg)
        assert matches == [] and ut == [0] and um == [0]

    def test_optimality_against_brute_force(self):
        rng = rng_for("assign-brute")
        cfg = TrackerConfig(R=np.eye(3) * 0.01, gate_prob=0.999999)
        for _ in range(50):
            n = int(rng.integers(1, 6))
            tracks = [make_track(t=rng.uniform(-5, 5, 3) * [1, 1, 0] + [0, 0, 0.4],
                                 sigma=np.eye(3) * 0.01) for _ in range(n)]
            ms = [meas(rng.uniform(-5, 5, 3) * [1, 1, 0] + [0, 0, 0.4])
                  for _ in range(n)]
            cost = np.zeros((n, n))
            for i, tr in enumerate(tracks):
                for j, m in enumerate(ms):
                    r, S = innovation(tr, m, cfg.R)
                    cost[i, j] = mahalanobis(r, S)
            matches, _, _ = assign(tracks, ms, cfg)
            if len(matches) == n:  # ungated full assignment
                total = sum(d for _, _, d in matches)
                best, _ = brute_force_assignment(cost)
                assert total == pytest.approx(best, abs=1e-9)

    def test_order_invariance(self):
        rng = rng_for("assign-order")
        tracks = [make_track(t=(i * 2.0, 0, 0.4), sigma=np.eye(3) * 0.05)
                  for i in range(4)]
        ms = [meas((i * 2.0 + 0.1, 0, 0.4)) for i in range(4)]
        matches, _, _ = assign(tracks, ms, self.CFG)
        baseline_pairs = {(i, tuple(ms[j].d)) for i, j, _ in matches}
        perm = rng.permutation(4)
        shuffled = [ms[p] for p in perm]
        matches2, _, _ = assign(tracks, shuffled, self.CFG)
        pairs2 = {(i, tuple(shuffled[j].d)) for i, j, _ in matches2}
        assert baseline_pairs == pairs2


class TestMeasurementExtraction:
    def test_bottom_center_and_width(self):
        # camera at origin of world, facing +x, 1.5 m up
        pose = yaw_pose(0, np.array([0.0, 0.0, 1.5]), 0.0)
        # box 5 m ahead, centered 1 m above ground, 0.4 x 2.0 x 0.6 extents
        label = LabelRecord("tree", [0.0, 0.5, 5.0], [0.4, 2.0, 0.6], 1.0)
        m = measurement_from_label(label, pose)
        # bottom-center: camera point (0, 1.5, 5) -> world (5, 0, 0)
        assert m.d[0] == pytest.approx(5.0)
        assert m.d[1] == pytest.approx(0.0)
        assert m.d[2] == pytest.approx(0.5)  # mean of 0.4 and 0.6

    def test_yawed_camera(self):
        pose = yaw_pose(0, np.array([2.0, 1.0, 1.5]), np.pi / 2)
        label = LabelRecord("tree", [0.0, 1.5, 4.0], [0.5, 3.0, 0.5], 1.0)
        m = measurement_from_label(label, pose)
        assert m.d[0] == pytest.approx(2.0)
        assert m.d[1] == pytest.approx(5.0)


class TestFovTest:
    CFG = TrackerConfig(max_range=15.0, h_fov_deg=110.0)

    def test_in_front_inside(self):
        pose = yaw_pose(0, np.array([0.0, 0.0, 1.5]), 0.0)
        assert not is_outside_fov(np.array([5.0, 0.0, 0.4]), pose, self.CFG)

    def test_behind_outside(self):
        pose = yaw_pose(0, np.array([0.0, 0.0, 1.5]), 0.0)
        assert is_outside_fov(np.array([-3.0, 0.0, 0.4]), pose, self.CFG)

    def test_beyond_range_outside(self):
        pose = yaw_pose(0, np.array([0.0, 0.0, 1.5]), 0.0)
        assert is_outside_fov(np.array([20.0, 0.0, 0.4]), pose, self.CFG)

    def test_cone_edge(self):
        pose = yaw_pose(0, np.array([0.0, 0.0, 1.5]), 0.0)
        # 54 deg off axis: inside a 110 deg cone; 56 deg: outside
        inside = np.array([np.cos(np.radians(54)) * 5,
                           np.sin(np.radians(54)) * 5, 0.4])
        outside = np.array([np.cos(np.radians(56)) * 5,
                            np.sin(np.radians(56)) * 5, 0.4])
        assert not is_outside_fov(inside, pose, self.CFG)
        assert is_outside_fov(outside, pose, self.CFG)


class StationaryScenario:
    """Feed the tracker the same detection repeatedly."""

    def __init__(self, **cfg_kwargs):
        self.cfg = TrackerConfig(**cfg_kwargs)
        self.tracker = Tracker(self.cfg)
        self.pose = yaw_pose(0, np.array([0.0, 0.0, 1.5]), 0.0)
        self.label = LabelRecord("tree", [0.0, 1.5, 5.0], [0.4, 3.0, 0.4], 1.0)

    def step(self, with_detection: bool):
        detections = [self.label] if with_detection else []
        return self.tracker.step(detections, self.pose)


class TestLifecycle:
    def test_confirmation_at_exactly_min_hits(self):
        s = StationaryScenario(min_hits=3)
        assert s.step(True) == []
        assert s.step(True) == []
        confirmed = s.step(True)
        assert len(confirmed) == 1
        assert confirmed[0].status is TrackStatus.CONFIRMED
        assert confirmed[0].hits == 3

    def test_deletion_at_exactly_max_age(self):
        s = StationaryScenario(min_hits=3, max_age=100, fov_exit_frames=10**6)
        for _ in range(3):
            s.step(True)
        for k in range(1, 100):
            assert len(s.step(False)) == 1, f"track should survive frame {k}"
        assert s.step(False) == []
        assert s.tracker.tracks == []

    def test_single_detection_never_confirms(self):
        s = StationaryScenario(min_hits=3, max_age=50, fov_exit_frames=10**6)
        s.step(True)
        for _ in range(200):
            assert s.step(False) == []

    def test_fov_exit_deletion(self):
        cfg = dict(min_hits=1, max_age=10**6, fov_exit_frames=10)
        s = StationaryScenario(**cfg)
        assert len(s.step(True)) == 1
        # move the camera past the tree: track now behind
        s.pose = yaw_pose(1, np.array([10.0, 0.0, 1.5]), 0.0)
        for k in range(9):
            assert len(s.step(False)) == 1, f"frame {k}"
        assert s.step(False) == []

    def test_ids_never_reused(self):
        s = StationaryScenario(min_hits=1, max_age=1, fov_exit_frames=10**6)
        ids = set()
        for _ in range(5):
            out = s.step(True)
            ids.add(out[0].id)
            s.step(False)  # age out immediately
        assert len(ids) == 5

    def test_no_confirmed_below_min_hits(self):
        rng = rng_for("lifecycle-min-hits")
        s = StationaryScenario(min_hits=4)
        for _ in range(100):
            out = s.step(bool(rng.integers(0, 2)))
            for track in out:
                assert track.hits >= 4


class TestCovarianceStress:
    def test_sigma_stays_symmetric_psd(self):
        rng = rng_for("sigma-stress")
        cfg = TrackerConfig()
        track = make_track(sigma=np.eye(3) * 0.5)
        for _ in range(2000):
            if rng.random() < 0.5:
                track = predict(track, cfg.Q)
            else:
                d = rng.normal(0, 0.3, 3) + [0, 0, 0.4]
                d[2] = abs(d[2])
                track = update(track, meas(d), cfg.R)
            assert np.allclose(track.Sigma, track.Sigma.T, atol=1e-9)
            assert np.linalg.eigvalsh(track.Sigma).min() > -1e-9


class TestConvergence:
    def test_stationary_tree_monte_carlo(self):
        rng = rng_for("kf-monte-carlo")
        sigma_meas = 0.1
        R = np.eye(3) * sigma_meas ** 2
        Q = np.zeros((3, 3))
        errors = []
        for _ in range(200):
            truth = np.array([5.0, 1.0, 0.4])
            track = TrackState(0, truth + rng.normal(0, sigma_meas, 3),
                               2.0 * R)
            for _ in range(100):
                track = predict(track, Q)
                track = update(track, meas(truth + rng.normal(0, sigma_meas, 3)), R)
            errors.append(track.t[:2] - truth[:2])
        rmse = float(np.sqrt(np.mean(np.sum(np.square(errors), axis=1))))
        assert rmse < sigma_meas / 3
