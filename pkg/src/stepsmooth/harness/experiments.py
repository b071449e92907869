"""Drivers for the noiseless, noisy and Markov-chain studies.

Each driver returns ``(summary, detail)`` data frames sorted by their keys,
so output is independent of execution order.
"""
from __future__ import annotations

import logging
import math
import threading
from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from ..altmin import KRRSolver, altmin_path, objective_nonincreasing, select_tau
from ..geometry import KernelSpec, gram_matrix, pairwise_distances
from ..spectral import (fourier, filtered_norm, min_kernel_profile, prop3_bound, survival,
                        tail_exponent, xi, markov_signal)
from ..topology import connectivity_radius, label_distance
from .metrics import bayes_accuracy, best_permutation, level_deviation
from .simulate import SimulationConfig, simulate, stream, worst_case_bounds

log = logging.getLogger(__name__)

NOISELESS_SETTINGS = ((2, 1), (2, 2), (3, 2), (3, 3))
NOISE_LEVELS = (0.0, 0.05, 0.1, 0.15)
MARKOV_PS = tuple(k / 10 for k in range(1, 11))
TAU_FACTORS = (1e-4, 1e-3, 1e-2, 1e-1, 1.0)


def default_n_grid(points: int = 12, lo: int = 25, hi: int = 3600) -> list[int]:
    """Geometric grid from ``lo`` to ``hi`` rounded to integers."""
    return sorted({int(round(v)) for v in np.geomspace(lo, hi, points)})


class SolverCache:
    """Keeps the eigendecompositions of the most recently used Gram matrices."""

    def __init__(self, spec: KernelSpec, maxsize: int = 2):
        self.spec = spec
        self.maxsize = maxsize
        self._store: OrderedDict = OrderedDict()
        self._lock = threading.Lock()

    def __call__(self, X) -> KRRSolver:
        X = np.ascontiguousarray(X, dtype=float)
        key = (X.shape, X.tobytes())
        with self._lock:
            if key in self._store:
                self._store.move_to_end(key)
                return self._store[key]
            solver = KRRSolver(gram_matrix(self.spec, X))
            self._store[key] = solver
            while len(self._store) > self.maxsize:
                self._store.popitem(last=False)
            return solver


def default_tau_grid(solver: KRRSolver, factors: Sequence = TAU_FACTORS) -> list[float]:
    """``factors * sqrt(lambda_min)`` of the (1/n-scaled) Gram matrix."""
    root = math.sqrt(solver.lam.min())
    return [f * root for f in factors]


@dataclass
class _Geometry:
    X: np.ndarray
    dist: np.ndarray
    rho_min: float
    solver: KRRSolver
    tau_grid: list


def _geometry(n: int, spec: KernelSpec, cache: SolverCache) -> _Geometry:
    X = np.arange(1, n + 1) / n
    dist = pairwise_distances(X, spec)
    solver = cache(X)
    return _Geometry(X, dist, connectivity_radius(dist), solver, default_tau_grid(solver))


def _fit_replicate(cfg: SimulationConfig, rep: int, geo: _Geometry, cache: SolverCache) -> dict:
    data = simulate(cfg, rep)
    M = cfg.M
    split_seed = int(stream(cfg.seed, cfg.n, 10 ** 6).integers(2 ** 31))
    fits = []
    if cfg.tau is None:
        # one split per n keeps the training Gram matrix shared across replicates
        tau = select_tau(data, cfg.kernel, M, geo.tau_grid, seed=rep,
                         split_seed=split_seed, solver_cache=cache, fits_out=fits)
        path = [t for t in geo.tau_grid if t >= tau]
    else:
        tau = cfg.tau
        path = [tau]
    fits += altmin_path(data, cfg.kernel, M, path, seed=rep, solver=geo.solver)
    fit = fits[-1]
    perm, acc = best_permutation(data.z_true, fit.z, M)
    monotone = all(objective_nonincreasing(f) for f in fits)
    lbd = label_distance(geo.dist, data.z_true, M)
    omega_rho, holds, prop2 = worst_case_bounds(cfg.n, M, cfg.beta)
    mean_f = float(np.mean(data.f_true))
    bound = prop2(lbd, mean_f)
    dev = level_deviation(data.mu_true, fit.mu, perm)
    return dict(M=M, beta=cfg.beta, sigma2=cfg.sigma2, n=cfg.n, replicate=rep, tau=tau,
                accuracy=acc, level_deviation=dev, rho_min=geo.rho_min, label_distance=lbd,
                omega_rho=omega_rho, condition_rhs=1.0 / (2 * M), condition_holds=holds,
                mean_f=mean_f, prop2_bound=bound, within_prop2=dev <= bound,
                iterations=fit.iterations, converged=fit.converged,
                objective_monotone=monotone)


def _run_cells(configs, replicates, spec, threads, progress=None):
    cache = SolverCache(spec)
    rows = []
    by_n: dict[int, list] = {}
    for cfg in configs:
        by_n.setdefault(cfg.n, []).append(cfg)
    for n in sorted(by_n):
        geo = _geometry(n, spec, cache)
        jobs = [(cfg, rep) for cfg in by_n[n] for rep in range(replicates)]
        if threads > 1:
            with ThreadPoolExecutor(threads) as pool:
                rows += list(pool.map(lambda j: _fit_replicate(j[0], j[1], geo, cache), jobs))
        else:
            rows += [_fit_replicate(cfg, rep, geo, cache) for cfg, rep in jobs]
        if progress:
            progress(n)
    return pd.DataFrame(rows)


def _summarize(detail: pd.DataFrame, keys) -> pd.DataFrame:
    g = detail.groupby(list(keys), sort=True)
    out = g.agg(replicates=("replicate", "size"),
                accuracy_mean=("accuracy", "mean"),
                accuracy_min=("accuracy", "min"),
                deviation_mean=("level_deviation", "mean"),
                deviation_max=("level_deviation", "max"),
                omega_rho=("omega_rho", "first"),
                condition_rhs=("condition_rhs", "first"),
                condition_holds=("condition_holds", "first"),
                rho_min=("rho_min", "first"),
                label_distance_mean=("label_distance", "mean"),
                prop2_bound_mean=("prop2_bound", "mean"),
                prop2_violations=("within_prop2", lambda s: int((~s).sum())),
                tau_median=("tau", "median"),
                iterations_mean=("iterations", "mean"),
                all_monotone=("objective_monotone", "all"))
    return out.reset_index()


def run_noiseless_suite(settings: Sequence = NOISELESS_SETTINGS, n_grid=None,
                        replicates: int = 20, seed: int = 0, tau: Optional[float] = None,
                        threads: int = 1, kernel: KernelSpec = KernelSpec("min"),
                        progress=None):
    n_grid = default_n_grid() if n_grid is None else list(n_grid)
    configs = [SimulationConfig(n=n, M=M, beta=b, sigma2=0.0, seed=seed, kernel=kernel, tau=tau)
               for (M, b) in settings for n in n_grid]
    detail = _run_cells(configs, replicates, kernel, threads, progress)
    detail = detail.sort_values(["M", "beta", "n", "replicate"]).reset_index(drop=True)
    return _summarize(detail, ["M", "beta", "n"]), detail


def run_noisy_suite(M: int = 3, beta: float = 3, sigma2s: Sequence = NOISE_LEVELS, n_grid=None,
                    replicates: int = 20, seed: int = 0, tau: Optional[float] = None,
                    threads: int = 1, kernel: KernelSpec = KernelSpec("min"), progress=None):
    n_grid = default_n_grid() if n_grid is None else list(n_grid)
    configs = [SimulationConfig(n=n, M=M, beta=beta, sigma2=s2, seed=seed, kernel=kernel, tau=tau)
               for s2 in sigma2s for n in n_grid]
    detail = _run_cells(configs, replicates, kernel, threads, progress)
    detail = detail.sort_values(["sigma2", "n", "replicate"]).reset_index(drop=True)
    summary = _summarize(detail, ["sigma2", "n"])
    summary.insert(2, "bayes_accuracy", [bayes_accuracy(M, s2) for s2 in summary["sigma2"]])
    summary.insert(3, "accuracy_median",
                   detail.groupby(["sigma2", "n"], sort=True)["accuracy"].median().to_numpy())
    return summary, detail


def run_markov_suite(n_grid: Sequence = (100, 200, 400, 800, 1600), ps: Sequence = MARKOV_PS,
                     chains: int = 200, seed: int = 0, survival_n: int = 1000,
                     survival_points: int = 50, progress=None):
    """Filtered norm of Markov step signals under the raw min-kernel spectrum.

    ``tau = sqrt(lam_n)`` for each ``n``.  ``survival_n`` is added to the
    grid.  Returns ``(summary, detail, survival)``; ``survival`` holds median
    survival curves at ``survival_n``.
    """
    detail, surv_rows = [], []
    for n in sorted(set(n_grid) | {survival_n}):
        prof = min_kernel_profile(n)
        lam = prof.lambdas
        tau = math.sqrt(lam[-1])
        ts = np.geomspace(lam[-1], lam[0], survival_points, endpoint=False)
        for pi, p in enumerate(ps):
            S = []
            for c in range(chains):
                g = markov_signal(n, p, stream(seed, n, pi, c))
                fv = fourier(prof, g)
                beta = tail_exponent(fv, lam)
                loose, refined = prop3_bound(fv, lam, tau, beta)
                fn = filtered_norm(fv, lam, tau)
                detail.append(dict(n=n, p=p, chain=c, tau=tau, xi=xi(fv, lam, tau),
                                   rank=fv.rank, beta=beta, filtered_norm=fn,
                                   loose_bound=loose,
                                   refined_bound=np.nan if refined is None else refined))
                if n == survival_n:
                    S.append(survival(fv, lam, ts))
            if n == survival_n:
                med = np.median(np.array(S), axis=0)
                surv_rows += [dict(n=n, p=p, t=t, survival_median=s) for t, s in zip(ts, med)]
        if progress:
            progress(n)
    detail = pd.DataFrame(detail).sort_values(["n", "p", "chain"]).reset_index(drop=True)
    detail["within_loose"] = detail["filtered_norm"] <= detail["loose_bound"]
    detail["within_refined"] = ~(detail["filtered_norm"] > detail["refined_bound"])
    g = detail.groupby(["n", "p"], sort=True)
    summary = g.agg(chains=("chain", "size"), tau=("tau", "first"),
                    median=("filtered_norm", "median"),
                    q025=("filtered_norm", lambda s: s.quantile(0.025)),
                    q975=("filtered_norm", lambda s: s.quantile(0.975)),
                    beta_median=("beta", "median"),
                    loose_violations=("within_loose", lambda s: int((~s).sum())),
                    refined_checked=("refined_bound", lambda s: int(s.notna().sum())),
                    refined_violations=("within_refined", lambda s: int((~s).sum())))
    return summary.reset_index(), detail, pd.DataFrame(surv_rows)


def loglog_slope(n, values) -> float:
    """Least-squares slope of ``log(values)`` against ``log(n)``."""
    return float(np.polyfit(np.log(np.asarray(n, float)), np.log(np.asarray(values, float)), 1)[0])
