"""Neighbor graphs, connectivity radius, cluster and label distances."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components


@dataclass(frozen=True)
class NeighborGraph:
    n: int
    radius: float
    edges: frozenset = field(default_factory=frozenset)

    def is_connected(self) -> bool:
        if self.n <= 1:
            return True
        if not self.edges:
            return False
        ij = np.array(sorted(self.edges))
        adj = coo_matrix((np.ones(len(ij)), (ij[:, 0], ij[:, 1])), shape=(self.n, self.n))
        n_comp, _ = connected_components(adj, directed=False)
        return n_comp == 1


def check_distance_matrix(dist) -> np.ndarray:
    D = np.asarray(dist, dtype=float)
    if D.ndim != 2 or D.shape[0] != D.shape[1] or D.shape[0] < 1:
        raise ValueError("distance matrix must be square and non-empty")
    if np.any(D < 0) or not np.all(np.isfinite(D)):
        raise ValueError("distance matrix has negative or non-finite entries")
    if not np.array_equal(D, D.T):
        raise ValueError("distance matrix is not symmetric")
    return D


def neighbor_graph(dist, rho: float) -> NeighborGraph:
    """Graph joining ``i != j`` whenever ``dist[i, j] <= rho``."""
    D = check_distance_matrix(dist)
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    i, j = np.nonzero(np.triu(D <= rho, 1))
    return NeighborGraph(D.shape[0], float(rho), frozenset(zip(i.tolist(), j.tolist())))


def minimum_spanning_tree(dist) -> list[tuple[int, int, float]]:
    """Prim's algorithm on a dense symmetric matrix.

    Returns edges ``(i, j, w)`` with ``i < j`` in the order they were added.
    Ties are broken toward the lexicographically smallest edge.
    """
    D = check_distance_matrix(dist)
    n = D.shape[0]
    if n == 1:
        return []
    in_tree = np.zeros(n, dtype=bool)
    in_tree[0] = True
    best = D[0].copy()
    parent = np.zeros(n, dtype=int)
    edges = []
    for _ in range(n - 1):
        cand = np.flatnonzero(~in_tree)
        w = best[cand]
        wmin = w.min()
        tied = cand[w == wmin]
        pairs = sorted((min(parent[v], v), max(parent[v], v), v) for v in tied)
        i, j, v = pairs[0]
        edges.append((int(i), int(j), float(wmin)))
        in_tree[v] = True
        closer = (D[v] < best) & ~in_tree
        # equal distances keep the smaller parent index for lexicographic ties
        equal = (D[v] == best) & ~in_tree & (v < parent)
        upd = closer | equal
        best[upd] = D[v, upd]
        parent[upd] = v
    return edges


def connectivity_radius(dist) -> float:
    """Smallest ``rho`` with a connected ``rho``-neighbor graph (MST bottleneck)."""
    edges = minimum_spanning_tree(dist)
    return max((w for _, _, w in edges), default=0.0)


def partition(z, M: int | None = None) -> list[np.ndarray]:
    """Index sets of each label in ``0..M-1``; every label must be attained."""
    z = np.asarray(z)
    if z.ndim != 1 or z.size == 0:
        raise ValueError("labels must be a non-empty 1-d array")
    if M is None:
        M = int(z.max()) + 1
    if z.min() < 0 or z.max() >= M:
        raise ValueError(f"labels must lie in 0..{M - 1}")
    clusters = [np.flatnonzero(z == k) for k in range(M)]
    empty = [k for k, c in enumerate(clusters) if c.size == 0]
    if empty:
        raise ValueError(f"empty cluster(s): {empty}")
    return clusters


def cluster_distances(dist, z, M: int | None = None) -> np.ndarray:
    """``(M, M)`` matrix of closest-pair distances between clusters."""
    D = check_distance_matrix(dist)
    clusters = partition(z, M)
    M = len(clusters)
    C = np.zeros((M, M))
    for k in range(M):
        for l in range(k + 1, M):
            C[k, l] = C[l, k] = D[np.ix_(clusters[k], clusters[l])].min()
    return C


def label_distance(dist, z, M: int | None = None) -> float:
    return connectivity_radius(cluster_distances(dist, z, M))
