"""k-means for the level/label block: exact 1-D dynamic program and Lloyd."""
from __future__ import annotations

import numba
import numpy as np


@numba.njit(cache=True)
def _seg_cost(S1, S2, j, i):
    # SSE of sorted values x[j:i]
    m = i - j
    s = S1[i] - S1[j]
    c = (S2[i] - S2[j]) - s * s / m
    return c if c > 0.0 else 0.0


@numba.njit(cache=True)
def _dp_layers(x, M):
    """Optimal contiguous M-segmentation of sorted ``x``.

    ``D[m, i]`` is the best SSE of ``x[:i]`` split into ``m + 1`` segments.
    Each layer is filled by divide and conquer over the (monotone) optimal
    split points, which keeps the recurrence exact at O(n log n) per layer.
    """
    n = x.shape[0]
    S1 = np.zeros(n + 1)
    S2 = np.zeros(n + 1)
    for i in range(n):
        S1[i + 1] = S1[i] + x[i]
        S2[i + 1] = S2[i] + x[i] * x[i]
    D = np.full((M, n + 1), np.inf)
    B = np.zeros((M, n + 1), dtype=np.int64)
    for i in range(1, n + 1):
        D[0, i] = _seg_cost(S1, S2, 0, i)
    stack = np.empty((4 * (n + 2) + 64, 4), dtype=np.int64)
    for m in range(1, M):
        # stack items: (lo, hi, opt_lo, opt_hi) over i in [lo, hi]
        top = 0
        stack[0, 0] = m + 1
        stack[0, 1] = n
        stack[0, 2] = m
        stack[0, 3] = n - 1
        top = 1
        while top > 0:
            top -= 1
            lo = stack[top, 0]
            hi = stack[top, 1]
            olo = stack[top, 2]
            ohi = stack[top, 3]
            if lo > hi:
                continue
            mid = (lo + hi) // 2
            best = np.inf
            arg = olo
            jmax = min(ohi, mid - 1)
            for j in range(olo, jmax + 1):
                v = D[m - 1, j] + _seg_cost(S1, S2, j, mid)
                if v < best:
                    best = v
                    arg = j
            D[m, mid] = best
            B[m, mid] = arg
            stack[top, 0] = lo
            stack[top, 1] = mid - 1
            stack[top, 2] = olo
            stack[top, 3] = arg
            top += 1
            stack[top, 0] = mid + 1
            stack[top, 1] = hi
            stack[top, 2] = arg
            stack[top, 3] = ohi
            top += 1
    return D, B


def kmeans_1d_exact(values, M: int):
    """Globally optimal 1-D k-means.

    Returns ``(mu, z, sse)`` with ``mu`` increasing and ``z`` in ``0..M-1``
    indexing ``mu``.  Optimal 1-D clusters are intervals of the sorted data,
    so a segmentation DP is exact.
    """
    v = np.asarray(values, dtype=float).ravel()
    n = v.size
    if not 1 <= M <= n:
        raise ValueError(f"need 1 <= M <= n, got M={M}, n={n}")
    order = np.argsort(v, kind="stable")
    xs = v[order]
    center = xs.mean()
    D, B = _dp_layers(xs - center, M)
    bounds = [n]
    i = n
    for m in range(M - 1, 0, -1):
        i = int(B[m, i])
        bounds.append(i)
    bounds.append(0)
    bounds = bounds[::-1]
    z_sorted = np.empty(n, dtype=np.int64)
    mu = np.empty(M)
    for k in range(M):
        seg = xs[bounds[k]:bounds[k + 1]]
        z_sorted[bounds[k]:bounds[k + 1]] = k
        mu[k] = seg.mean()
    z = np.empty(n, dtype=np.int64)
    z[order] = z_sorted
    sse = float(np.sum((v - mu[z]) ** 2))
    return mu, z, sse


def _sq_dists(X, C):
    return np.sum((X[:, None, :] - C[None, :, :]) ** 2, axis=-1)


def _kmeanspp(X, M, rng):
    n = X.shape[0]
    centers = [X[rng.integers(n)]]
    d2 = np.sum((X - centers[0]) ** 2, axis=1)
    for _ in range(1, M):
        total = d2.sum()
        idx = rng.integers(n) if total <= 0 else rng.choice(n, p=d2 / total)
        centers.append(X[idx])
        d2 = np.minimum(d2, np.sum((X - X[idx]) ** 2, axis=1))
    return np.array(centers, dtype=float)


def _lloyd(X, C, max_iter=300):
    C = C.copy()
    M = C.shape[0]
    z = np.argmin(_sq_dists(X, C), axis=1)
    for _ in range(max_iter):
        for k in range(M):
            members = z == k
            if members.any():
                C[k] = X[members].mean(axis=0)
            else:
                # reseed an empty centroid at the point farthest from its center
                far = np.argmax(np.sum((X - C[z]) ** 2, axis=1))
                C[k] = X[far]
                z[far] = k
        z_new = np.argmin(_sq_dists(X, C), axis=1)
        if np.array_equal(z_new, z):
            break
        z = z_new
    for k in range(M):
        if np.any(z == k):
            C[k] = X[z == k].mean(axis=0)
    sse = float(np.sum((X - C[z]) ** 2))
    return C, z, sse


def kmeans_lloyd(vectors, M: int, seed: int = 0, n_init: int = 10, init=None):
    """Lloyd's algorithm from k-means++ seeds, best of ``n_init`` restarts.

    ``init`` adds a warm start (an ``(M, p)`` centroid array); the best run
    over all starts is kept.  Labels are ordered by increasing first-column
    centroid.
    """
    X = np.asarray(vectors, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    if not 1 <= M <= n:
        raise ValueError(f"need 1 <= M <= n, got M={M}, n={n}")
    rng = np.random.default_rng(seed)
    starts = [_kmeanspp(X, M, rng) for _ in range(n_init)]
    if init is not None:
        starts.insert(0, np.asarray(init, dtype=float).reshape(M, -1))
    best = None
    for C0 in starts:
        res = _lloyd(X, C0)
        if best is None or res[2] < best[2]:
            best = res
    C, z, sse = best
    order = np.lexsort(C.T[::-1])
    rank = np.empty(M, dtype=np.int64)
    rank[order] = np.arange(M)
    return C[order], rank[z], sse
