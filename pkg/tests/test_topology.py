import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.sparse.csgraph import connected_components

from stepsmooth.geometry import KernelSpec, pairwise_distances
from stepsmooth.topology import (cluster_distances, connectivity_radius, label_distance,
                                 minimum_spanning_tree, neighbor_graph, partition)


def test_neighbor_graph_examples():
    D = pairwise_distances([0.0, 1.0])
    assert neighbor_graph(D, 0.5).edges == frozenset()
    assert neighbor_graph(D, 1.0).edges == {(0, 1)}
    D3 = pairwise_distances([0.0, 0.4, 1.0])
    assert neighbor_graph(D3, 0.6).edges == {(0, 1), (1, 2)}


def test_neighbor_graph_rejects_bad_input():
    with pytest.raises(ValueError):
        neighbor_graph(np.array([[0, 1], [2, 0.0]]), 1.0)
    with pytest.raises(ValueError):
        neighbor_graph(np.array([[0, -1], [-1, 0.0]]), 1.0)
    with pytest.raises(ValueError):
        neighbor_graph(pairwise_distances([0.0, 1.0]), -0.1)


def test_connectivity_radius_examples():
    assert connectivity_radius(pairwise_distances([0.0, 0.5, 0.6])) == pytest.approx(0.5)
    assert connectivity_radius(pairwise_distances([0.3])) == 0.0
    n = 40
    x = np.arange(1, n + 1) / n
    assert connectivity_radius(pairwise_distances(x)) == pytest.approx(1 / n)
    assert connectivity_radius(pairwise_distances(x, KernelSpec("min"))) == pytest.approx(n ** -0.5)


def _bottleneck_brute(D):
    # smallest candidate threshold giving a connected graph
    n = D.shape[0]
    if n == 1:
        return 0.0
    for rho in np.unique(D[np.triu_indices(n, 1)]):
        if connected_components(D <= rho, directed=False)[0] == 1:
            return rho


def test_mst_bottleneck_matches_threshold_scan(rng):
    for _ in range(50):
        X = rng.normal(size=(rng.integers(1, 25), 2))
        D = pairwise_distances(X)
        assert connectivity_radius(D) == _bottleneck_brute(D)
        edges = minimum_spanning_tree(D)
        assert len(edges) == D.shape[0] - 1
        assert all(i < j for i, j, _ in edges)


def test_mst_handles_duplicate_points():
    D = pairwise_distances([0.1, 0.1, 0.5])
    assert connectivity_radius(D) == pytest.approx(0.4)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=2, max_size=20, unique=True),
       st.floats(0, 1), st.floats(0, 1))
def test_neighbor_graph_monotone_and_attained(xs, r1, r2):
    D = pairwise_distances(np.array(xs))
    lo, hi = sorted((r1, r2))
    assert neighbor_graph(D, lo).edges <= neighbor_graph(D, hi).edges
    rho = connectivity_radius(D)
    assert neighbor_graph(D, rho).is_connected()
    if rho - 1e-12 > 0:
        assert not neighbor_graph(D, rho - 1e-12 - 1e-15).is_connected()


def test_cluster_distance_examples():
    D = pairwise_distances([0.1, 0.2, 0.5, 0.6])
    C = cluster_distances(D, [0, 0, 1, 1])
    assert C[0, 1] == pytest.approx(0.3) and C[1, 0] == pytest.approx(0.3)
    assert np.all(np.diag(C) == 0)
    assert label_distance(D, [0, 0, 1, 1]) == pytest.approx(0.3)
    assert cluster_distances(D, [0, 0, 0, 0]).tolist() == [[0.0]]
    assert label_distance(D, [0, 0, 0, 0]) == 0.0
    D3 = pairwise_distances([0.0, 0.5, 1.0])
    np.testing.assert_allclose(cluster_distances(D3, [0, 1, 2]),
                               [[0, 0.5, 1.0], [0.5, 0, 0.5], [1.0, 0.5, 0]])
    assert label_distance(D3, [0, 1, 2]) == pytest.approx(0.5)


def test_empty_cluster_rejected():
    with pytest.raises(ValueError):
        partition([0, 0, 2], M=3)


def test_label_distance_properties(rng):
    for _ in range(40):
        n = int(rng.integers(3, 30))
        M = int(rng.integers(1, min(n, 5) + 1))
        X = rng.random((n, 2))
        D = pairwise_distances(X)
        z = np.concatenate([np.arange(M), rng.integers(0, M, n - M)])
        rng.shuffle(z)
        lbd = label_distance(D, z, M)
        assert 0 <= lbd <= connectivity_radius(D) + 1e-15
        perm = rng.permutation(M)
        assert label_distance(D, perm[z], M) == lbd
