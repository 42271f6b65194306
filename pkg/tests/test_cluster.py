"""K-means: worked examples, invariants, and a brute-force Lloyd oracle."""

import numpy as np
import pytest

from allprep.cluster import kmeans_1d, reconstruct_clustered
from allprep.errors import ShapeMismatchError


def lloyd_oracle(points, init, max_iter=300, tol=1e-4):
    """Loop-and-list Lloyd's algorithm mirroring the documented conventions.

    Assignment ties go to the lowest cluster index; empty clusters are
    repaired (in ascending index order) by converting the sample
    farthest from its own centroid into the empty cluster's centroid,
    zeroing that sample's distance; a cluster emptied by a repair
    cascade keeps its previous centroid.  Integer-valued samples keep
    every mean exact in float64, so the implementation must agree
    bit for bit.
    """
    xs = [float(p) for p in points]
    centroids = [float(c) for c in init]
    k = len(centroids)

    def assign():
        labels, dists = [], []
        for x in xs:
            best_j, best_d = 0, (x - centroids[0]) ** 2
            for j in range(1, k):
                d = (x - centroids[j]) ** 2
                if d < best_d:
                    best_j, best_d = j, d
            labels.append(best_j)
            dists.append(best_d)
        counts = [0] * k
        for lab in labels:
            counts[lab] += 1
        for j in range(k):
            if counts[j] > 0:
                continue
            far, far_d = 0, dists[0]
            for i in range(1, len(xs)):
                if dists[i] > far_d:
                    far, far_d = i, dists[i]
            counts[labels[far]] -= 1
            labels[far] = j
            counts[j] = 1
            dists[far] = 0.0
        return labels, dists, counts

    history = []
    for _ in range(max_iter):
        labels, dists, counts = assign()
        history.append(sum(dists))
        new_centroids = []
        for j in range(k):
            if counts[j] == 0:
                new_centroids.append(centroids[j])
                continue
            total = 0.0
            for x, lab in zip(xs, labels):
                if lab == j:
                    total += x
            new_centroids.append(total / counts[j])
        shift = max(abs(n - o) for n, o in zip(new_centroids, centroids))
        centroids = new_centroids
        if shift <= tol:
            break
    labels, dists, _ = assign()
    history.append(sum(dists))
    return centroids, labels, history


class TestWorkedExamples:
    def test_single_value_single_cluster(self):
        model = kmeans_1d(np.full(12, 100, dtype=np.uint8), k=1, seed=0)
        assert model.k == 1
        assert model.centroids[0] == 100.0
        assert model.objective == 0.0

    def test_perfectly_separable_pair(self):
        model = kmeans_1d(np.array([0, 0, 10, 10]), k=2, seed=4)
        assert sorted(model.centroids.tolist()) == [0.0, 10.0]
        assert model.objective == 0.0

    def test_hand_worked_three_point_instance(self):
        """{0,10,12} with init {0,10}: one update gives centroids {0,11}, objective 2."""
        model = kmeans_1d(np.array([0, 10, 12]), k=2, init_centroids=np.array([0.0, 10.0]))
        assert model.centroids.tolist() == [0.0, 11.0]
        assert model.assignments.tolist() == [0, 1, 1]
        assert model.objective == 2.0

    def test_degenerate_fewer_distinct_than_k(self):
        """k above the distinct-value count collapses to one cluster per value."""
        model = kmeans_1d(np.array([5, 5, 9, 9, 9]), k=4, seed=1)
        assert model.k == 2
        assert model.centroids.tolist() == [5.0, 9.0]
        assert model.objective == 0.0

    def test_empty_input_rejected(self):
        with pytest.raises(ValueError):
            kmeans_1d(np.array([]), k=2, seed=0)

    def test_too_few_samples_for_explicit_init(self):
        with pytest.raises(ValueError):
            kmeans_1d(np.array([1.0]), k=3, init_centroids=np.array([0.0, 1.0, 2.0]))


class TestInvariants:
    def test_objective_history_non_increasing(self):
        rng = np.random.default_rng(101)
        for _ in range(50):
            n = int(rng.integers(8, 120))
            k = int(rng.integers(1, 8))
            samples = rng.integers(0, 256, size=n)
            model = kmeans_1d(samples, k=k, seed=int(rng.integers(1 << 30)))
            hist = model.objective_history
            assert np.all(np.diff(hist) <= 0.0), hist

    def test_nearest_centroid_consistency(self):
        """No sample has a strictly closer centroid than the one assigned."""
        rng = np.random.default_rng(103)
        for _ in range(30):
            samples = rng.integers(0, 256, size=int(rng.integers(10, 80)))
            model = kmeans_1d(samples, k=int(rng.integers(1, 6)), seed=7)
            d2 = (samples[:, None].astype(float) - model.centroids[None, :]) ** 2
            chosen = d2[np.arange(samples.size), model.assignments]
            assert np.all(chosen <= d2.min(axis=1))

    def test_same_seed_same_model(self):
        rng = np.random.default_rng(107)
        samples = rng.integers(0, 256, size=200)
        a = kmeans_1d(samples, k=5, seed=42)
        b = kmeans_1d(samples, k=5, seed=42)
        assert np.array_equal(a.centroids, b.centroids)
        assert np.array_equal(a.assignments, b.assignments)
        assert a.objective == b.objective

    def test_assignment_indices_in_range(self):
        samples = np.random.default_rng(109).integers(0, 256, size=64)
        model = kmeans_1d(samples, k=4, seed=3)
        assert model.assignments.min() >= 0
        assert model.assignments.max() < 4


class TestOracleEquivalence:
    def test_matches_brute_force_lloyd(self):
        """Shared-init runs agree with the loop-based oracle exactly."""
        rng = np.random.default_rng(113)
        for _ in range(150):
            k = int(rng.integers(1, 8))
            n = int(rng.integers(k, 120))
            samples = rng.integers(0, 256, size=n)
            init = samples[rng.integers(0, n, size=k)].astype(float)
            model = kmeans_1d(samples, k=k, init_centroids=init)
            centroids, labels, history = lloyd_oracle(samples.tolist(), init.tolist())
            assert model.centroids.tolist() == centroids
            assert model.assignments.tolist() == labels
            assert all(b <= a for a, b in zip(history, history[1:]))


class TestReconstruct:
    def test_from_hand_worked_model(self):
        model = kmeans_1d(np.array([0, 10, 12]), k=2, init_centroids=np.array([0.0, 10.0]))
        plane = reconstruct_clustered(model, width=3, height=1)
        assert plane.dtype == np.uint8
        assert plane.tolist() == [[0, 11, 11]]

    def test_single_cluster_constant_plane(self):
        model = kmeans_1d(np.full(6, 37), k=1, seed=0)
        plane = reconstruct_clustered(model, width=3, height=2)
        assert np.all(plane == 37)

    def test_rounding_and_clamping(self):
        """A centroid of 255.4 lands at 255 after round-half-up and clamp."""
        model = kmeans_1d(np.full(5, 255), k=1, seed=0)
        model.centroids[0] = 255.4
        plane = reconstruct_clustered(model, width=5, height=1)
        assert np.all(plane == 255)
        model.centroids[0] = 130.5
        assert np.all(reconstruct_clustered(model, 5, 1) == 131)

    def test_shape_mismatch(self):
        model = kmeans_1d(np.array([1, 2, 3]), k=1, seed=0)
        with pytest.raises(ShapeMismatchError):
            reconstruct_clustered(model, width=2, height=2)
