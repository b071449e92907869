"""AltMin: alternating kernel ridge regression and k-means.

Model: ``y_i = f(x_i) + mu[z_i] + noise`` with ``f`` in an RKHS.  The
regularized objective is

    (1/n) sum_i (y_i - mu[z_i] - f_i)^2 + tau * ||f||_H^2

with ``f = n^-1/2 sum_i alpha_i k(x_i, .)``, so that ``f_i = sqrt(n) (K alpha)_i``
and ``||f||_H^2 = alpha' K alpha`` for the 1/n-scaled Gram matrix ``K``.
Labels are 0-based throughout.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import scipy.linalg

from .clustering import kmeans_1d_exact, kmeans_lloyd
from .geometry import KernelSpec, as_points, cross_kernel, gram_matrix

log = logging.getLogger(__name__)


class KRRFactorizationError(np.linalg.LinAlgError):
    pass


@dataclass
class Dataset:
    """Sample locations and observations, with optional ground truth."""

    X: np.ndarray
    y: np.ndarray
    f_true: Optional[np.ndarray] = None
    mu_true: Optional[np.ndarray] = None
    z_true: Optional[np.ndarray] = None
    sigma2: Optional[float] = None

    def __post_init__(self):
        self.X = as_points(self.X)
        self.y = np.asarray(self.y, dtype=float)
        if self.y.shape[0] != self.X.shape[0]:
            raise ValueError("X and y lengths differ")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return 1 if self.y.ndim == 1 else self.y.shape[1]

    def subset(self, idx) -> "Dataset":
        pick = lambda a: None if a is None else np.asarray(a)[idx]
        return Dataset(self.X[idx], self.y[idx], pick(self.f_true), self.mu_true,
                       pick(self.z_true), self.sigma2)


@dataclass
class DecompositionFit:
    alpha: np.ndarray
    fitted_f: np.ndarray
    mu: np.ndarray
    z: np.ndarray
    tau: float
    objective_trace: list = field(default_factory=list)
    converged: bool = False
    shift: float = 0.0
    iterations: int = 0

    @property
    def M(self) -> int:
        return self.mu.shape[0]


def krr_step(K, residual, tau: float):
    """One KRR solve, ``alpha = (K + tau I)^-1 r / sqrt(n)``.

    Returns ``(alpha, fitted)`` with ``fitted = K (K + tau I)^-1 r``.
    """
    K = np.asarray(K, dtype=float)
    r = np.asarray(residual, dtype=float)
    if tau <= 0:
        raise ValueError("tau must be positive")
    n = K.shape[0]
    A = K + tau * np.eye(n)
    try:
        cf = scipy.linalg.cho_factor(A, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        cond = np.linalg.cond(A)
        raise KRRFactorizationError(
            f"Cholesky of K + tau I failed (tau={tau:g}, cond~{cond:.3e})") from exc
    w = scipy.linalg.cho_solve(cf, r, check_finite=False)
    return w / math.sqrt(n), K @ w


class KRRSolver:
    """Repeated KRR solves against one Gram matrix.

    Holds an eigendecomposition ``K = V diag(lam) V'`` so that any ``tau``
    costs two matrix-vector products.  Instances are read-only after
    construction and may be shared between fits.
    """

    def __init__(self, K):
        self.K = np.asarray(K, dtype=float)
        lam, V = np.linalg.eigh(self.K)
        self.lam = np.maximum(lam, 0.0)
        self.V = V
        self.n = self.K.shape[0]

    def solve(self, residual, tau: float):
        """Return ``(alpha, fitted, hnorm2)`` where ``hnorm2 = ||f||_H^2``."""
        c = self.V.T @ residual
        d = 1.0 / (self.lam + tau)
        alpha = self.V @ (c * d) / math.sqrt(self.n)
        fitted = self.V @ (c * self.lam * d)
        hnorm2 = float(np.sum(self.lam * (c * d) ** 2)) / self.n
        return alpha, fitted, hnorm2


def rkhs_norm2(K, alpha) -> float:
    """``||f||_H^2 = alpha' K alpha`` for ``f = n^-1/2 sum_i alpha_i K(x_i, .)``."""
    return float(alpha @ (K @ alpha))


def objective(y, mu, z, fitted_f, hnorm2, tau) -> float:
    y = np.asarray(y, dtype=float)
    r = y - mu[z] - (fitted_f if y.ndim == 1 else fitted_f[:, None])
    return float(np.mean(r ** 2) + tau * hnorm2)


def objective_nonincreasing(fit: DecompositionFit, slack: float = 1e-10) -> bool:
    tr = np.asarray(fit.objective_trace)
    return bool(np.all(np.diff(tr) <= slack * np.maximum(1.0, np.abs(tr[:-1]))))


def zero_mean_adjust(fit: DecompositionFit) -> DecompositionFit:
    """Move the empirical mean of ``fitted_f`` into the levels."""
    c = float(np.mean(fit.fitted_f))
    return replace(fit, fitted_f=fit.fitted_f - c, mu=fit.mu + c, shift=fit.shift + c)


def _level_step(resid, M, seed, init=None):
    if resid.ndim == 1:
        return kmeans_1d_exact(resid, M)
    return kmeans_lloyd(resid, M, seed=seed, init=init)


def _joint_levels(solver, y, z, M, tau):
    """Levels minimizing the objective jointly over ``(mu, f)`` for fixed ``z``.

    Profiling out ``f`` leaves ``(tau/n) (y - Z mu)' (K + tau I)^-1 (y - Z mu)``
    for the channel-mean part of ``y``; the remaining within-row part of a
    multichannel ``y`` is fitted by plain cluster means.
    """
    Z = np.zeros((len(z), M))
    Z[np.arange(len(z)), z] = 1.0
    ybar = y if y.ndim == 1 else y.mean(axis=1)
    d = 1.0 / (solver.lam + tau)
    VZ = solver.V.T @ Z
    Vy = solver.V.T @ ybar
    A = VZ.T @ (d[:, None] * VZ)
    mubar = np.linalg.solve(A, VZ.T @ (d * Vy))
    if y.ndim == 1:
        return mubar
    dev = y - ybar[:, None]
    counts = Z.sum(axis=0)
    return mubar[:, None] + (Z.T @ dev) / counts[:, None]


def _canonical(mu, z):
    key = mu if mu.ndim == 1 else mu[:, 0]
    order = np.argsort(key, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    return mu[order], rank[z]


def _alternate(y, K, M, tau, seed, max_iter, tol, solver, init):
    n = y.shape[0]
    multi = y.ndim == 2
    if tau <= 0:
        raise ValueError("tau must be positive")
    if solver is None:
        solver = KRRSolver(K)
    if init is None:
        # every level at the sample mean: the first KRR step smooths the
        # centred observations, which keeps the fit shift-equivariant
        mu = np.repeat(y.mean(axis=0, keepdims=True), M, axis=0)
        z = np.zeros(n, dtype=np.int64)
    else:
        mu = np.asarray(init[0], dtype=float).copy()
        z = np.asarray(init[1], dtype=np.int64).copy()
    trace = []
    converged = False
    z_prev = None
    it = 0
    for it in range(1, max_iter + 1):
        if z_prev is not None and np.array_equal(z, z_prev):
            mu = _joint_levels(solver, y, z, M, tau)
        r = y - mu[z]
        alpha, fitted, hnorm2 = solver.solve(r.mean(axis=1) if multi else r, tau)
        obj = objective(y, mu, z, fitted, hnorm2, tau)
        prev = trace[-1] if trace else None
        trace.append(obj)
        if prev is not None and prev - obj <= tol * abs(prev):
            converged = True
            break
        z_prev = z
        resid = y - (fitted[:, None] if multi else fitted)
        mu, z, _ = _level_step(resid, M, seed + it, init=mu if multi else None)
    if not converged:
        log.info("AltMin stopped at max_iter=%d without meeting tol=%g", max_iter, tol)
    mu, z = _canonical(mu, z)
    fit = DecompositionFit(alpha, fitted, mu, z, tau, trace, converged, 0.0, it)
    return zero_mean_adjust(fit)


def altmin_fit(data: Dataset, spec: KernelSpec, M: int, tau: float, seed: int = 0,
               max_iter: int = 200, tol: float = 1e-8, *,
               solver: Optional[KRRSolver] = None, init=None) -> DecompositionFit:
    """Fit the step + smooth decomposition to scalar observations.

    Starts with every level at ``mean(y)``, so the first KRR step smooths
    the centred ``y``, then alternates exact 1-D k-means on ``y - f`` with the KRR
    update.  Whenever the labels repeat, the levels are refitted jointly
    with ``f`` (exact minimization over ``(mu, f)`` given ``z``).  ``init``
    optionally supplies starting ``(mu, z)``.  Stops once the relative
    objective decrease drops below ``tol``.  ``solver`` may carry a
    precomputed eigendecomposition of the Gram matrix of ``data.X``.
    """
    if data.y.ndim != 1:
        raise ValueError("altmin_fit expects scalar observations; see altmin_fit_multiseq")
    K = solver.K if solver is not None else gram_matrix(spec, data.X)
    return _alternate(data.y, K, M, tau, seed, max_iter, tol, solver, init)


def altmin_fit_multiseq(data: Dataset, spec: KernelSpec, M: int, tau: float, seed: int = 0,
                        max_iter: int = 200, tol: float = 1e-8, *,
                        solver: Optional[KRRSolver] = None, init=None) -> DecompositionFit:
    """AltMin for ``n x p`` observations sharing one smooth field.

    The KRR step fits the channel-average residual (the exact minimizer of
    the per-entry averaged objective); the level step runs Lloyd on the
    ``n x p`` residual, warm-started from the current levels so the
    objective cannot increase.
    """
    y = data.y
    if y.ndim != 2 or y.shape[1] < 2:
        raise ValueError("multi-sequence mode needs an (n, p) array with p >= 2")
    K = solver.K if solver is not None else gram_matrix(spec, data.X)
    return _alternate(y, K, M, tau, seed, max_iter, tol, solver, init)


def predict_f(fit: DecompositionFit, spec: KernelSpec, X_train, x_new):
    """Evaluate the fitted smooth component (zero-mean shift included)."""
    X_train = as_points(X_train)
    n = X_train.shape[0]
    scalar = np.ndim(x_new) == 0 or (np.ndim(x_new) == 1 and X_train.shape[1] > 1
                                     and np.shape(x_new)[0] == X_train.shape[1])
    Xn = as_points(np.atleast_1d(x_new)[None, :] if scalar and np.ndim(x_new) == 1 else x_new)
    vals = cross_kernel(spec, Xn, X_train) @ fit.alpha / math.sqrt(n) - fit.shift
    return float(vals[0]) if scalar else vals


def log_transform(y):
    y = np.asarray(y, dtype=float)
    bad = np.argwhere(~(y > 0))
    if bad.size:
        idx = tuple(int(i) for i in bad[0])
        raise ValueError(f"log transform needs positive entries; got {y[idx]} at index {idx}")
    return np.log(y)


def inverse_log_transform(v):
    return np.exp(np.asarray(v, dtype=float))


def nearest_level(resid, mu):
    resid = np.asarray(resid, dtype=float)
    if mu.ndim == 1:
        return np.argmin(np.abs(resid[:, None] - mu[None, :]), axis=1)
    return np.argmin(np.sum((resid[:, None, :] - mu[None, :, :]) ** 2, axis=-1), axis=1)


def holdout_split(n: int, seed: int, frac: float = 0.8):
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    k = max(1, min(n - 1, int(round(frac * n))))
    return np.sort(perm[:k]), np.sort(perm[k:])


def holdout_error(fit, spec, train: Dataset, test: Dataset) -> float:
    f_new = predict_f(fit, spec, train.X, test.X)
    if test.y.ndim == 1:
        resid = test.y - f_new
        pred = f_new + fit.mu[nearest_level(resid, fit.mu)]
    else:
        resid = test.y - f_new[:, None]
        pred = f_new[:, None] + fit.mu[nearest_level(resid, fit.mu)]
    return float(np.mean((test.y - pred) ** 2))


def altmin_path(data: Dataset, spec: KernelSpec, M: int, taus, seed: int = 0, *,
                solver: Optional[KRRSolver] = None, **fit_kw) -> list[DecompositionFit]:
    """Fits along ``taus`` from largest to smallest, each warm-started from
    the previous labels and levels.  Returned in that (descending) order."""
    fitter = altmin_fit if data.y.ndim == 1 else altmin_fit_multiseq
    if solver is None:
        solver = KRRSolver(gram_matrix(spec, data.X))
    fits, init = [], None
    for tau in sorted((float(t) for t in taus), reverse=True):
        fit = fitter(data, spec, M, tau, seed=seed, solver=solver, init=init, **fit_kw)
        fits.append(fit)
        init = (fit.mu, fit.z)
    return fits


def select_tau(data: Dataset, spec: KernelSpec, M: int, grid, seed: int = 0,
               split_seed: Optional[int] = None, solver_cache=None, fits_out=None,
               **fit_kw) -> float:
    """Pick ``tau`` from ``grid`` by an 80/20 holdout.

    Candidates are fitted on the training split along the path from the
    largest to the smallest ``tau`` (see :func:`altmin_path`) and scored by
    the mean squared error of ``f(x) + nearest level`` on the holdout.  Ties
    go to the larger ``tau``.  ``split_seed`` (default ``seed``) fixes the
    split; ``solver_cache`` is an optional callable ``X -> KRRSolver``;
    ``fits_out``, if a list, receives the candidate fits.
    """
    grid = sorted({float(t) for t in grid}, reverse=True)
    if not grid or min(grid) <= 0:
        raise ValueError("tau grid must be non-empty and positive")
    if len(grid) == 1:
        return grid[0]
    tr, te = holdout_split(data.n, seed if split_seed is None else split_seed)
    train, test = data.subset(tr), data.subset(te)
    solver = solver_cache(train.X) if solver_cache else KRRSolver(gram_matrix(spec, train.X))
    fits = altmin_path(train, spec, M, grid, seed=seed, solver=solver, **fit_kw)
    if fits_out is not None:
        fits_out.extend(fits)
    scores = [holdout_error(fit, spec, train, test) for fit in fits]
    best = min(scores)
    return max(t for t, s in zip(grid, scores) if s == best)
