"""Permutation-aligned accuracy, level deviation and Bayes error."""
from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.stats import norm

MAX_PERMUTATION_M = 6


def best_permutation(z_true, z_hat, M: int) -> tuple[tuple[int, ...], float]:
    """Relabeling ``perm`` of ``z_hat`` maximizing agreement with ``z_true``.

    Returns ``(perm, accuracy)`` where ``perm[k]`` is the true label matched to
    estimated label ``k``.
    """
    if M > MAX_PERMUTATION_M:
        raise ValueError(f"exhaustive matching supports M <= {MAX_PERMUTATION_M}")
    z_true = np.asarray(z_true)
    z_hat = np.asarray(z_hat)
    if z_true.shape != z_hat.shape:
        raise ValueError("label vectors differ in length")
    # confusion[k, l] = #{i: z_hat_i = k, z_true_i = l}
    confusion = np.zeros((M, M), dtype=np.int64)
    np.add.at(confusion, (z_hat, z_true), 1)
    best, best_hits = None, -1
    for perm in itertools.permutations(range(M)):
        hits = int(confusion[np.arange(M), perm].sum())
        if hits > best_hits:
            best, best_hits = perm, hits
    return best, best_hits / z_true.size


def aligned_accuracy(z_true, z_hat, M: int) -> float:
    return best_permutation(z_true, z_hat, M)[1]


def level_deviation(mu_true, mu_hat, perm) -> float:
    """``max_k ||mu_true[perm[k]] - mu_hat[k]||`` (2-norm per level for vectors)."""
    mu_true = np.asarray(mu_true, dtype=float)
    mu_hat = np.asarray(mu_hat, dtype=float)
    diff = mu_true[list(perm)] - mu_hat
    if diff.ndim == 1:
        return float(np.max(np.abs(diff)))
    return float(np.max(np.linalg.norm(diff, axis=1)))


def bayes_error(M: int, sigma: float) -> float:
    """Error of the nearest-level rule for unit-gap levels with equal priors.

    The two outer levels err on one side and the ``M - 2`` inner ones on both,
    giving ``2 (M - 1) / M * Phi(-1 / (2 sigma))``.
    """
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    if sigma == 0 or M == 1:
        return 0.0
    return 2.0 * (M - 1) / M * float(norm.cdf(-1.0 / (2.0 * sigma)))


def bayes_error_mc(M: int, sigma: float, draws: int = 10 ** 6, seed: int = 0) -> float:
    """Monte Carlo estimate of the same nearest-level error rate."""
    rng = np.random.default_rng(seed)
    mu = np.arange(1, M + 1) - (M + 1) / 2.0
    z = rng.integers(0, M, size=draws)
    obs = mu[z] + rng.normal(0.0, sigma, size=draws)
    zhat = np.argmin(np.abs(obs[:, None] - mu[None, :]), axis=1)
    return float(np.mean(zhat != z))


def bayes_accuracy(M: int, sigma2: float) -> float:
    return 1.0 - bayes_error(M, math.sqrt(sigma2))
