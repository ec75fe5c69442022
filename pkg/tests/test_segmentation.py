import numpy as np
import pytest

from canopy.errors import DegenerateInputError, InsufficientPointsError
from canopy.geometry import PointCloud, WORLD
from canopy.segmentation import (NOISE, ClusterSource, dbscan, filter_clusters,
                                 ransac_ground_plane, remove_ground)

from conftest import rng_for
from reference_impls import canonical_labels, dbscan_reference


class TestRansac:
    def test_recovers_synthetic_plane(self):
        rng = rng_for("ransac-plane")
        ground = np.concatenate([rng.uniform(-10, 10, (1000, 2)),
                                 np.zeros((1000, 1))], axis=1)
        outliers = np.concatenate([rng.uniform(-10, 10, (100, 2)),
                                   rng.uniform(1, 5, (100, 1))], axis=1)
        cloud = PointCloud(np.concatenate([ground, outliers]), WORLD)
        plane = ransac_ground_plane(cloud, 1000, 0.5, seed=0)
        angle = np.degrees(np.arccos(np.clip(plane.normal @ [0, 0, 1], -1, 1)))
        assert angle < 2.0
        assert plane.inlier_count >= 1000

    def test_exact_plane_all_inliers(self):
        rng = rng_for("ransac-exact")
        pts = np.concatenate([rng.uniform(-5, 5, (200, 2)),
                              np.full((200, 1), 2.0)], axis=1)
        plane = ransac_ground_plane(PointCloud(pts, WORLD), 100, 0.1, seed=1)
        assert np.allclose(plane.normal, [0, 0, 1], atol=1e-9)
        assert plane.offset == pytest.approx(2.0, abs=1e-9)
        assert plane.inlier_count == 200

    def test_too_few_points(self):
        cloud = PointCloud([[0, 0, 0], [1, 0, 0]], WORLD)
        with pytest.raises(InsufficientPointsError):
            ransac_ground_plane(cloud, 10, 0.5, seed=0)

    def test_all_collinear_degenerate(self):
        pts = np.stack([np.linspace(0, 1, 10), np.zeros(10), np.zeros(10)], axis=1)
        with pytest.raises(DegenerateInputError):
            ransac_ground_plane(PointCloud(pts, WORLD), 50, 0.5, seed=0)

    def test_deterministic_under_seed(self):
        rng = rng_for("ransac-seed")
        pts = rng.uniform(-4, 4, (500, 3))
        pts[:, 2] *= 0.05
        cloud = PointCloud(pts, WORLD)
        a = ransac_ground_plane(cloud, 200, 0.2, seed=42)
        b = ransac_ground_plane(cloud, 200, 0.2, seed=42)
        assert np.array_equal(a.normal, b.normal)
        assert a.offset == b.offset and a.inlier_count == b.inlier_count

    def test_inlier_count_monotone_in_threshold(self):
        rng = rng_for("ransac-monotone")
        pts = np.concatenate([
            np.concatenate([rng.uniform(-5, 5, (400, 2)),
                            rng.normal(0, 0.05, (400, 1))], axis=1),
            rng.uniform(-5, 5, (100, 3)),
        ])
        cloud = PointCloud(pts, WORLD)
        counts = [ransac_ground_plane(cloud, 300, t, seed=7).inlier_count
                  for t in (0.05, 0.1, 0.2, 0.5, 1.0)]
        assert counts == sorted(counts)


class TestRemoveGround:
    PLANE_ARGS = dict(n_iters=100, dist_thresh=0.2, seed=0)

    def _flat_plane(self):
        rng = rng_for("remove-ground")
        pts = np.concatenate([rng.uniform(-5, 5, (100, 2)),
                              np.zeros((100, 1))], axis=1)
        return ransac_ground_plane(PointCloud(pts, WORLD), **self.PLANE_ARGS)

    def test_margin_boundary(self):
        plane = self._flat_plane()
        cloud = PointCloud([[0, 0, 0.49], [0, 0, 0.51]], WORLD)
        kept = remove_ground(cloud, plane, 0.5)
        assert np.allclose(kept.points, [[0, 0, 0.51]])

    def test_below_ground_removed(self):
        plane = self._flat_plane()
        cloud = PointCloud([[0, 0, -1.0], [0, 0, 2.0]], WORLD)
        kept = remove_ground(cloud, plane, 0.5)
        assert np.allclose(kept.points, [[0, 0, 2.0]])

    def test_idempotent(self):
        rng = rng_for("remove-idempotent")
        plane = self._flat_plane()
        cloud = PointCloud(rng.uniform(-3, 3, (500, 3)), WORLD)
        once = remove_ground(cloud, plane, 0.5)
        twice = remove_ground(once, plane, 0.5)
        assert np.array_equal(once.points, twice.points)

    def test_empty_result_allowed(self):
        plane = self._flat_plane()
        cloud = PointCloud([[0, 0, 0.1]], WORLD)
        assert len(remove_ground(cloud, plane, 0.5)) == 0


class TestDbscan:
    def test_collinear_chain_single_cluster(self):
        pts = np.stack([np.arange(12) * 0.05, np.zeros(12), np.zeros(12)], axis=1)
        labels = dbscan(pts, eps=0.1, min_samples=3)
        expected = dbscan_reference(pts, 0.1, 3)
        assert np.array_equal(canonical_labels(labels), canonical_labels(expected))
        assert np.all(labels == 0)

    def test_isolated_point_is_noise(self):
        labels = dbscan(np.array([[0.0, 0.0, 0.0]]), eps=0.1, min_samples=2)
        assert labels.tolist() == [NOISE]

    def test_two_far_blobs(self):
        rng = rng_for("dbscan-blobs")
        a = rng.uniform(-0.02, 0.02, (50, 3))
        b = rng.uniform(-0.02, 0.02, (50, 3)) + [10, 0, 0]
        labels = dbscan(np.concatenate([a, b]), eps=0.1, min_samples=10)
        assert set(labels.tolist()) == {0, 1}
        assert len(set(labels[:50])) == 1 and len(set(labels[50:])) == 1

    def test_matches_reference_on_random_clouds(self):
        rng = rng_for("dbscan-reference")
        for _ in range(40):
            n = int(rng.integers(1, 200))
            pts = rng.uniform(-1, 1, (n, 3))
            mine = dbscan(pts, eps=0.15, min_samples=4)
            ref = dbscan_reference(pts, 0.15, 4)
            assert np.array_equal(canonical_labels(mine), canonical_labels(ref))

    def test_partition_property(self):
        rng = rng_for("dbscan-partition")
        pts = rng.uniform(-1, 1, (300, 3))
        labels = dbscan(pts, eps=0.2, min_samples=5)
        assert labels.shape == (300,)
        assert np.all(labels >= NOISE)

    def test_min_samples_one_clusters_everything(self):
        rng = rng_for("dbscan-ms1")
        pts = rng.uniform(-1, 1, (50, 3))
        labels = dbscan(pts, eps=0.01, min_samples=1)
        assert np.all(labels >= 0)


class TestFilterClusters:
    def test_threshold_application(self):
        pts = np.zeros((4499, 3))
        labels = np.array([0] * 2500 + [1] * 1999)
        clusters = filter_clusters(labels, PointCloud(pts, WORLD), p_min=2000)
        assert len(clusters) == 1
        assert clusters[0].size == 2500
        assert clusters[0].id == 0
        assert clusters[0].source is ClusterSource.AUTO

    def test_no_clusters(self):
        labels = np.full(10, NOISE)
        assert filter_clusters(labels, PointCloud(np.zeros((10, 3)), WORLD), 1) == []

    def test_all_pass_count_preserved_and_dense_ids(self):
        labels = np.array([5] * 3 + [2] * 4 + [9] * 3)
        clusters = filter_clusters(labels, PointCloud(np.zeros((10, 3)), WORLD), 2)
        assert [c.id for c in clusters] == [0, 1, 2]
        assert sorted(c.size for c in clusters) == [3, 3, 4]
