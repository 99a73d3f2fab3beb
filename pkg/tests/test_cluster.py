import itertools

import numpy as np
import pytest

from argmine.cluster import (
    ClusterAssignment,
    HdbscanConfig,
    KmeansConfig,
    argmax_label,
    core_distances,
    dense_relabel,
    hdbscan,
    kmeans,
    minimum_spanning_tree,
    mutual_reachability,
    pairwise_distances,
)
from argmine.errors import DataError


def brute_force_mst_weight(W):
    """Minimum spanning tree weight by exhaustive search over spanning trees
    (Kruskal would share logic with Prim, so enumerate instead)."""
    n = W.shape[0]
    edges = [(i, j) for i in range(n) for j in range(i + 1, n)]
    best = np.inf
    for tree_edges in itertools.combinations(edges, n - 1):
        parent = list(range(n))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        ok = True
        weight = 0.0
        for a, b in tree_edges:
            ra, rb = find(a), find(b)
            if ra == rb:
                ok = False
                break
            parent[ra] = rb
            weight += W[a, b]
        if ok and weight < best:
            best = weight
    return best


class TestKmeans:
    def test_separated_pairs(self):
        X = np.array([[0.0, 0.0], [0.0, 1.0], [10.0, 0.0], [10.0, 1.0]])
        result = kmeans(X, KmeansConfig(k=2, seed=3))
        labels = result.assignment.labels
        assert labels[0] == labels[1] and labels[2] == labels[3]
        assert labels[0] != labels[2]
        np.testing.assert_allclose(
            sorted(result.centroids.tolist()), [[0.0, 0.5], [10.0, 0.5]]
        )

    def test_k_equals_n(self):
        rng = np.random.default_rng(1)
        X = rng.standard_normal((5, 3))
        result = kmeans(X, KmeansConfig(k=5, seed=1))
        assert result.assignment.n_clusters == 5
        assert result.inertia == pytest.approx(0.0, abs=1e-20)

    def test_three_blob_oracle(self):
        rng = np.random.default_rng(7)
        centers = np.array([[0.0, 0.0], [5.0, 0.0], [0.0, 5.0]])
        X = np.vstack(
            [rng.normal(0, 0.1, size=(20, 2)) + c for c in centers]
        )
        truth = np.repeat([0, 1, 2], 20)
        result = kmeans(X, KmeansConfig(k=3, seed=11))
        # partition identical to blob ids up to relabeling
        mapping = {}
        for t, p in zip(truth, result.assignment.labels):
            mapping.setdefault(t, p)
            assert mapping[t] == p
        assert len(set(mapping.values())) == 3

    def test_k_exceeds_n(self):
        with pytest.raises(DataError):
            kmeans(np.zeros((2, 2)), KmeansConfig(k=3))

    def test_inertia_trace_non_increasing(self):
        rng = np.random.default_rng(0)
        X = rng.standard_normal((60, 4))
        result = kmeans(X, KmeansConfig(k=6, seed=0))
        trace = result.inertia_trace
        assert all(a >= b - 1e-9 for a, b in zip(trace, trace[1:]))

    def test_translation_invariance(self):
        rng = np.random.default_rng(5)
        X = rng.standard_normal((40, 3))
        shift = np.array([100.0, -50.0, 25.0])
        a = kmeans(X, KmeansConfig(k=4, seed=9)).assignment.labels
        b = kmeans(X + shift, KmeansConfig(k=4, seed=9)).assignment.labels
        assert np.array_equal(a, b)

    def test_deterministic(self):
        rng = np.random.default_rng(2)
        X = rng.standard_normal((30, 2))
        a = kmeans(X, KmeansConfig(k=3, seed=4))
        b = kmeans(X, KmeansConfig(k=3, seed=4))
        assert np.array_equal(a.assignment.labels, b.assignment.labels)
        assert np.array_equal(a.centroids, b.centroids)

    def test_labels_dense_first_occurrence(self):
        rng = np.random.default_rng(3)
        X = rng.standard_normal((25, 2))
        labels = kmeans(X, KmeansConfig(k=4, seed=2)).assignment.labels
        seen = []
        for l in labels:
            if l not in seen:
                seen.append(l)
        assert seen == sorted(seen)


class TestHdbscan:
    def test_two_triads_one_outlier(self):
        X = np.array(
            [
                [0.0, 0.0], [0.1, 0.0], [0.0, 0.1],
                [10.0, 0.0], [10.1, 0.0], [10.0, 0.1],
                [100.0, 100.0],
            ]
        )
        result = hdbscan(X, HdbscanConfig(min_cluster_size=2))
        labels = result.assignment.labels
        assert result.assignment.n_clusters == 2
        assert labels[6] == -1
        assert len(set(labels[:3])) == 1 and len(set(labels[3:6])) == 1

    def test_identical_points_single_cluster(self):
        X = np.ones((6, 2))
        result = hdbscan(X, HdbscanConfig(min_cluster_size=2))
        assert result.assignment.n_clusters == 1
        assert result.assignment.noise_fraction == 0.0
        np.testing.assert_allclose(result.membership, 1.0)

    def test_uniform_line_min_cluster_size_n(self):
        X = np.arange(6.0)[:, None]
        result = hdbscan(X, HdbscanConfig(min_cluster_size=6))
        assert result.assignment.n_clusters <= 1

    def test_too_few_points(self):
        with pytest.raises(DataError):
            hdbscan(np.zeros((1, 2)), HdbscanConfig(min_cluster_size=2))

    def test_mst_matches_brute_force_small(self):
        rng = np.random.default_rng(123)
        for trial in range(25):
            n = int(rng.integers(4, 9))
            X = rng.standard_normal((n, 2))
            W = mutual_reachability(X, 2)
            edges = minimum_spanning_tree(W)
            weight = sum(w for _, _, w in edges)
            assert weight == pytest.approx(brute_force_mst_weight(W), abs=1e-9)

    def test_scale_invariance_exact(self):
        rng = np.random.default_rng(42)
        X = rng.standard_normal((30, 3))
        a = hdbscan(X, HdbscanConfig(min_cluster_size=3)).assignment.labels
        b = hdbscan(X * 1000.0, HdbscanConfig(min_cluster_size=3)).assignment.labels
        assert np.array_equal(a, b)

    def test_min_cluster_size_respected(self):
        rng = np.random.default_rng(17)
        for seed in range(5):
            X = np.random.default_rng(seed).standard_normal((40, 2))
            for mcs in (2, 3, 5):
                labels = hdbscan(X, HdbscanConfig(min_cluster_size=mcs)).assignment.labels
                for cluster in set(labels.tolist()) - {-1}:
                    assert (labels == cluster).sum() >= mcs

    def test_membership_in_unit_range(self):
        rng = np.random.default_rng(3)
        X = rng.standard_normal((25, 2))
        result = hdbscan(X, HdbscanConfig(min_cluster_size=2))
        assert np.all(result.membership >= 0.0)
        assert np.all(result.membership <= 1.0)
        assert not result.membership[result.assignment.labels == -1].any()

    def test_core_distance_definition(self):
        X = np.array([[0.0], [1.0], [3.0], [6.0]])
        # distance to the 2nd nearest neighbor, self excluded
        np.testing.assert_allclose(core_distances(X, 2), [3.0, 2.0, 3.0, 5.0])

    def test_mutual_reachability_formula(self):
        X = np.array([[0.0], [1.0], [5.0]])
        D = pairwise_distances(X)
        core = np.sort(D, axis=1)[:, 1]
        W = mutual_reachability(X, 1)
        for i in range(3):
            for j in range(3):
                if i != j:
                    assert W[i, j] == max(core[i], core[j], D[i, j])


class TestArgmaxLabel:
    def test_distinct_argmax_columns(self):
        X = np.zeros((2, 8))
        X[0, 3] = 5.0
        X[1, 7] = 3.0
        assert argmax_label(X).labels.tolist() == [0, 1]

    def test_tie_lowest_column(self):
        X = np.zeros((1, 6))
        X[0, 2] = X[0, 5] = 4.0
        assignment = argmax_label(X)
        assert assignment.labels.tolist() == [0]
        X2 = np.zeros((2, 6))
        X2[0, 2] = X2[0, 5] = 4.0
        X2[1, 5] = 4.0
        assert argmax_label(X2).labels.tolist() == [0, 1]

    def test_zero_row_noise(self):
        X = np.zeros((3, 4))
        X[0, 1] = 1.0
        X[2, 1] = 2.0
        assert argmax_label(X).labels.tolist() == [0, -1, 0]

    def test_row_rescale_invariance(self):
        rng = np.random.default_rng(10)
        X = rng.random((12, 5))
        scales = rng.uniform(0.1, 10.0, size=(12, 1))
        a = argmax_label(X).labels
        b = argmax_label(X * scales).labels
        assert np.array_equal(a, b)


class TestClusterAssignment:
    def test_dense_relabel(self):
        raw = np.array([7, 7, -1, 3, 7, 3])
        assert dense_relabel(raw).tolist() == [0, 0, -1, 1, 0, 1]

    def test_non_dense_rejected(self):
        with pytest.raises(DataError):
            ClusterAssignment(labels=np.array([0, 2]))

    def test_json_shape(self):
        assignment = ClusterAssignment(labels=np.array([0, 1, -1]))
        payload = assignment.to_json(["a", "b", "c"])
        assert payload == {"labels": {"a": 0, "b": 1, "c": -1}, "noise_id": -1}
