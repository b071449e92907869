import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stepsmooth.clustering import kmeans_1d_exact, kmeans_lloyd


def brute_sse(v, M):
    """Exhaustive minimum over all surjective M-labelings."""
    best = np.inf
    for z in itertools.product(range(M), repeat=len(v)):
        z = np.array(z)
        if np.unique(z).size < M:
            continue
        sse = sum(np.sum((v[z == k] - v[z == k].mean()) ** 2) for k in range(M))
        best = min(best, sse)
    return best


def test_examples():
    mu, z, sse = kmeans_1d_exact([0, 0, 1, 1], 2)
    np.testing.assert_allclose(mu, [0, 1])
    assert sse == 0
    assert list(z) == [0, 0, 1, 1]
    mu, z, sse = kmeans_1d_exact([0.0, 0.1, 1.0, 1.1], 2)
    np.testing.assert_allclose(mu, [0.05, 1.05])
    assert sse == pytest.approx(0.01)


def test_m_equals_n(rng):
    v = rng.normal(size=7)
    mu, z, sse = kmeans_1d_exact(v, 7)
    np.testing.assert_allclose(mu, np.sort(v))
    assert sse == pytest.approx(0, abs=1e-24)


def test_rejects_too_many_clusters():
    with pytest.raises(ValueError):
        kmeans_1d_exact([1.0, 2.0], 3)
    with pytest.raises(ValueError):
        kmeans_lloyd(np.zeros((2, 2)), 3)


def test_matches_brute_force(rng):
    for _ in range(100):
        n = int(rng.integers(1, 11))
        M = int(rng.integers(1, min(3, n) + 1))
        v = rng.normal(size=n) * rng.choice([0.1, 1.0, 10.0])
        mu, z, sse = kmeans_1d_exact(v, M)
        assert sse == pytest.approx(brute_sse(v, M), rel=1e-9, abs=1e-12)
        assert np.all(np.diff(mu) > 0) or M == 1
        np.testing.assert_allclose(sse, np.sum((v - mu[z]) ** 2))


def test_large_offset_is_stable(rng):
    v = np.concatenate([rng.normal(0, 0.01, 50), rng.normal(1, 0.01, 50)]) + 1e6
    mu, z, _ = kmeans_1d_exact(v, 2)
    assert np.all(z[:50] == 0) and np.all(z[50:] == 1)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-100, 100, allow_nan=False), min_size=1, max_size=40),
       st.integers(1, 4))
def test_sse_nonincreasing_in_M(values, M):
    v = np.array(values)
    M = min(M, v.size)
    _, _, sse = kmeans_1d_exact(v, M)
    if M > 1:
        _, _, sse_less = kmeans_1d_exact(v, M - 1)
        assert sse <= sse_less + 1e-9 * (1 + sse_less)
    # labels index clusters consistently with nearest means
    mu, z, _ = kmeans_1d_exact(v, M)
    d = np.abs(v[:, None] - mu[None, :])
    assert np.all(d[np.arange(v.size), z] <= d.min(axis=1) + 1e-9)


def test_lloyd_separated_groups(rng):
    a = rng.normal([0, 0], 0.05, size=(30, 2))
    b = rng.normal([5, 5], 0.05, size=(20, 2))
    X = np.vstack([a, b])
    C, z, _ = kmeans_lloyd(X, 2, seed=1)
    np.testing.assert_allclose(C[0], a.mean(axis=0))
    np.testing.assert_allclose(C[1], b.mean(axis=0))
    assert np.all(z[:30] == 0) and np.all(z[30:] == 1)


def test_lloyd_n_equals_M(rng):
    X = rng.normal(size=(4, 3))
    _, _, sse = kmeans_lloyd(X, 4, seed=0)
    assert sse == pytest.approx(0, abs=1e-24)


def test_lloyd_square_corners():
    X = np.array([[0, 0], [1, 0], [0, 1], [1, 1]], dtype=float)
    best = np.inf
    for z in itertools.product(range(2), repeat=4):
        z = np.array(z)
        if np.unique(z).size == 2:
            best = min(best, sum(np.sum((X[z == k] - X[z == k].mean(0)) ** 2) for k in range(2)))
    _, _, sse = kmeans_lloyd(X, 2, seed=3)
    assert sse == pytest.approx(best)


def test_lloyd_deterministic(rng):
    X = rng.normal(size=(60, 3))
    r1 = kmeans_lloyd(X, 3, seed=11)
    r2 = kmeans_lloyd(X, 3, seed=11)
    np.testing.assert_array_equal(r1[1], r2[1])
    np.testing.assert_array_equal(r1[0], r2[0])


def test_lloyd_warm_start_never_worse(rng):
    X = rng.normal(size=(80, 2))
    C0, _, _ = kmeans_lloyd(X, 3, seed=0, n_init=1)
    sse_init = float(np.min(((X[:, None] - C0[None]) ** 2).sum(-1), axis=1).sum())
    _, _, sse = kmeans_lloyd(X, 3, seed=5, n_init=2, init=C0)
    assert sse <= sse_init + 1e-12
