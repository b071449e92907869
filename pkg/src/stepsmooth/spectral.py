"""Spectral view of one KRR step: eigenbasis, survival function, filtered norm.

For ``K = V diag(lam) V'`` and a sampled signal ``g`` with coefficients
``gc = V' g``, KRR with ridge ``tau`` keeps ``h(lam) = lam^2 / (lam + tau)^2``
of each component's energy.  The filtered norm ``(1/n) sum h(lam_i) gc_i^2``
measures how much of a step signal leaks into the smooth estimate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geometry import KernelSpec, gram_matrix

BETA_CAP = 64.0
RANK_TOL = 1e-20


@dataclass(frozen=True)
class SpectralProfile:
    lambdas: np.ndarray  # descending
    V: np.ndarray
    source: str = "gram"


@dataclass(frozen=True)
class FourierVector:
    coeffs: np.ndarray
    sup_norm: float
    rank: int  # 1-based index of the last nonnegligible coefficient, 0 if none

    @property
    def n(self) -> int:
        return self.coeffs.shape[0]

    @property
    def energy(self) -> np.ndarray:
        """Per-component mass ``gc_i^2 / n``."""
        return self.coeffs ** 2 / self.n


def eigendecompose(K) -> SpectralProfile:
    """Symmetric eigendecomposition with eigenvalues sorted descending."""
    K = np.asarray(K, dtype=float)
    if K.ndim != 2 or K.shape[0] != K.shape[1] or not np.allclose(K, K.T, atol=1e-12):
        raise ValueError("eigendecompose needs a symmetric square matrix")
    lam, V = np.linalg.eigh(K)
    lam, V = lam[::-1], V[:, ::-1]
    if np.any(lam < -1e-10):
        raise np.linalg.LinAlgError(f"matrix is not PSD: eigenvalue {lam.min():.3e}")
    return SpectralProfile(np.maximum(lam, 0.0), np.ascontiguousarray(V), "gram")


def min_kernel_profile(n: int, normalize: bool = False) -> SpectralProfile:
    """Eigendecomposition of the min kernel on ``x_i = i / n``.

    ``normalize=False`` uses the raw kernel values ``min(x_i, x_j)``, whose
    smallest eigenvalue is about ``1 / (4 n)``; the 1/n-scaled KRR matrix
    has every eigenvalue divided by ``n``.
    """
    x = np.arange(1, n + 1) / n
    return eigendecompose(gram_matrix(KernelSpec("min"), x, normalize=normalize))


def synthetic_profile(alpha: float, n: int, basis: Optional[np.ndarray] = None) -> SpectralProfile:
    """Eigenvalues ``i^(-2 alpha)`` paired with a reference min-kernel eigenbasis."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    lam = np.arange(1, n + 1, dtype=float) ** (-2.0 * alpha)
    V = min_kernel_profile(n).V if basis is None else basis
    return SpectralProfile(lam, V, "synthetic")


def fourier(profile: SpectralProfile, g) -> FourierVector:
    g = np.asarray(g, dtype=float)
    if g.shape != (profile.V.shape[0],):
        raise ValueError(f"signal has shape {g.shape}, expected ({profile.V.shape[0]},)")
    c = profile.V.T @ g
    return FourierVector(c, float(np.max(np.abs(g))) if g.size else 0.0, _rank(c))


def _rank(c) -> int:
    c2 = c ** 2
    total = c2.sum()
    if total == 0:
        return 0
    big = np.flatnonzero(c2 > RANK_TOL * total)
    return int(big[-1]) + 1 if big.size else 0


def survival(fv: FourierVector, lambdas, t):
    """``S(t) = sum_i (gc_i^2 / n) 1{lam_i > t}``; vectorized over ``t``."""
    lam = np.asarray(lambdas, dtype=float)
    e = fv.energy
    tt = np.asarray(t, dtype=float)
    out = (e[None, :] * (lam[None, :] > tt.reshape(-1, 1))).sum(axis=1)
    return float(out[0]) if tt.ndim == 0 else out.reshape(tt.shape)


def tail_exponent(fv: FourierVector, lambdas) -> float:
    """Largest ``beta`` with ``S(t) <= ||g||_inf^2 (lam_r / t)^beta`` for all ``t > 0``.

    ``S`` is a step function, constant on ``[u_{k+1}, u_k)`` for the distinct
    eigenvalues ``u``, while the bound decreases in ``t``; the constraint binds
    as ``t`` approaches each ``u_k > lam_r`` from below.  Returns ``BETA_CAP``
    when nothing binds.
    """
    if fv.rank < 1:
        raise ValueError("signal has no nonzero Fourier coefficient")
    G2 = fv.sup_norm ** 2
    if G2 == 0:
        raise ValueError("sup norm of the signal is zero")
    lam = np.asarray(lambdas, dtype=float)
    lam_r = lam[fv.rank - 1]
    order = np.argsort(-lam, kind="stable")
    ls, cum = lam[order], np.cumsum(fv.energy[order])
    # last index of each tie group among eigenvalues strictly above lam_r
    last = np.append(ls[1:] < ls[:-1], True) & (ls > lam_r) & (cum > 0)
    if not last.any():
        return BETA_CAP
    b = np.log(G2 / cum[last]) / np.log(ls[last] / lam_r)
    beta = min(BETA_CAP, max(float(b.min()), 0.0))
    return beta


def filter_gain(lambdas, tau):
    lam = np.asarray(lambdas, dtype=float)
    return lam ** 2 / (lam + tau) ** 2


def filtered_norm(fv: FourierVector, lambdas, tau: float) -> float:
    """``(1/n) sum_i h(lam_i; tau) gc_i^2``."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    return float(np.sum(filter_gain(lambdas, tau) * fv.energy))


def xi(fv: FourierVector, lambdas, tau: float) -> float:
    return float(np.asarray(lambdas)[fv.rank - 1] / tau)


def _inner_inf(x: float, beta: float) -> float:
    # inf over b in [0, min(beta, 2)) of 2 x^b / (2 - b); closure value at the edge
    hi = min(beta, 2.0)
    if hi <= 0 or x >= 1:
        return 1.0
    b = 2.0 - 1.0 / math.log(1.0 / x)
    b = min(max(b, 0.0), hi)
    if b >= 2.0:
        return math.inf
    return 2.0 * x ** b / (2.0 - b)


def prop3_bound(fv: FourierVector, lambdas, tau: float, beta: Optional[float] = None):
    """Upper bounds on :func:`filtered_norm` from the tail exponent.

    Returns ``(loose, refined)``; ``refined`` is ``None`` unless ``beta >= 2``
    and ``xi < exp(-1/2)``.
    """
    if beta is None:
        beta = tail_exponent(fv, lambdas)
    x = xi(fv, lambdas, tau)
    G2 = fv.sup_norm ** 2
    loose = 2.0 * G2 * max(x ** 2, _inner_inf(x, beta))
    refined = None
    if beta >= 2 and x < math.exp(-0.5):
        L = math.log(1.0 / x)
        refined = 4.0 * G2 * L * x ** (2.0 - 1.0 / L)
    return loose, refined


def mse_decomposition(f_fv: FourierVector, g_fv: FourierVector, lambdas, tau: float,
                      sigma2: float):
    """``(bias, filter, variance)`` terms of the one-step KRR risk bound."""
    if tau <= 0 or sigma2 < 0:
        raise ValueError("need tau > 0 and sigma2 >= 0")
    lam = np.asarray(lambdas, dtype=float)
    n = lam.shape[0]
    bias = 2.0 / n * float(np.sum(tau ** 2 * f_fv.coeffs ** 2 / (lam + tau) ** 2))
    filt = 2.0 * filtered_norm(g_fv, lam, tau)
    var = sigma2 / n * float(np.sum(filter_gain(lam, tau)))
    return bias, filt, var


def markov_signal(n: int, p: float, seed=0) -> np.ndarray:
    """Two-state +/-1 chain that flips sign with probability ``p`` per step."""
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    s1 = 1.0 if rng.random() < 0.5 else -1.0
    flips = rng.random(n - 1) < p
    signs = np.concatenate([[s1], np.where(flips, -1.0, 1.0)])
    return np.cumprod(signs)


def sobolev_schedule(alpha: float, n: int):
    """``(lambdas, tau, xi)`` for ``lam_i = i^(-2a)``, ``tau = n^(-2a/(2a+1))``."""
    if alpha <= 0 or n < 1:
        raise ValueError("need alpha > 0 and n >= 1")
    lam = np.arange(1, n + 1, dtype=float) ** (-2.0 * alpha)
    tau = float(n) ** (-2.0 * alpha / (2.0 * alpha + 1.0))
    return lam, tau, float(lam[-1] / tau)
