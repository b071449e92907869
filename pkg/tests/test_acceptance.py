"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The noiseless experiment is run twice through the CLI (separate processes);
the two outputs serve the bound, recovery, monotonicity and determinism
criteria.  Expect several minutes of runtime.
"""
import math
import subprocess
import sys
import time

import numpy as np
import pandas as pd
import pytest

from stepsmooth.altmin import krr_step
from stepsmooth.clustering import kmeans_1d_exact
from stepsmooth.harness.experiments import loglog_slope, run_markov_suite, run_noisy_suite
from stepsmooth.harness.metrics import bayes_error
from stepsmooth.harness.simulate import oracle_instance
from stepsmooth.identifiability import LinearModulus, verify_theorem1
from stepsmooth.spectral import (filtered_norm, fourier, markov_signal, min_kernel_profile,
                                 sobolev_schedule, synthetic_profile)

from test_altmin import dense_krr_oracle, random_psd
from test_clustering import brute_sse

MARKOV_GRID = (100, 200, 400, 800, 1600)


def _run_noiseless(out_dir):
    t0 = time.perf_counter()
    subprocess.run([sys.executable, "-m", "stepsmooth", "experiment", "noiseless",
                    "--seed", "7", "--out-dir", str(out_dir)], check=True)
    return time.perf_counter() - t0


@pytest.fixture(scope="module")
def noiseless(tmp_path_factory):
    root = tmp_path_factory.mktemp("noiseless")
    runtime = _run_noiseless(root / "run1")
    _run_noiseless(root / "run2")
    return dict(runtime=runtime, dirs=(root / "run1", root / "run2"),
                summary=pd.read_csv(root / "run1" / "noiseless_summary.csv"),
                detail=pd.read_csv(root / "run1" / "noiseless_detail.csv"))


@pytest.fixture(scope="module")
def noisy():
    summary, detail = run_noisy_suite(M=3, beta=3, sigma2s=[0.05], n_grid=[3600],
                                      replicates=20, seed=0)
    return summary, detail


@pytest.fixture(scope="module")
def markov():
    t0 = time.perf_counter()
    summary, detail, _ = run_markov_suite(n_grid=MARKOV_GRID, chains=200, seed=0,
                                          survival_n=1000)
    return summary, detail, time.perf_counter() - t0


def test_c01_theorem1_oracle(acceptance):
    t0 = time.perf_counter()
    certified = holds = 0
    instances = 120
    for seed in range(instances):
        n, M = 6 + seed % 7, 2 + seed % 2
        inst = oracle_instance(seed, n, M)
        cert = verify_theorem1(inst.y, inst.dist, inst.z, inst.mu, LinearModulus(inst.L))
        holds += cert.condition_holds
        certified += cert.certified
    runtime = time.perf_counter() - t0
    ok = holds == instances and certified == instances and runtime < 60
    acceptance(1, ok, f"{certified}/{instances} instances certified (n<=12, M in {{2,3}}), "
                      f"{runtime:.1f}s")
    assert ok


def test_c02_prop2_bound(acceptance, noiseless):
    d = noiseless["detail"]
    rows = d[d.condition_holds]
    violations = int((rows.level_deviation > rows.prop2_bound).sum())
    ok = len(rows) > 0 and violations == 0 and noiseless["runtime"] < 300
    acceptance(2, ok, f"{violations} violations over {len(rows)} condition-satisfied rows, "
                      f"suite runtime {noiseless['runtime']:.0f}s")
    assert ok


def test_c03_noiseless_recovery(acceptance, noiseless):
    s = noiseless["summary"]
    parts, ok = [], True
    for (M, beta), grp in s.groupby(["M", "beta"]):
        rows = grp[grp.condition_holds]
        good = bool(len(rows)) and bool((rows.accuracy_mean == 1.0).all()) \
            and bool((rows.replicates == 20).all())
        ok &= good
        parts.append(f"({M},{beta:g}): {len(rows)} n-values, min mean acc "
                     f"{rows.accuracy_mean.min():.4f}")
    ok &= len(parts) == 4
    acceptance(3, ok, "; ".join(parts))
    assert ok


def test_c04_noisy_recovery(acceptance, noisy):
    summary, _ = noisy
    acc = float(summary.accuracy_mean.iloc[0])
    ref = 1 - bayes_error(3, math.sqrt(0.05))
    ok = abs(acc - ref) <= 0.02 and int(summary.replicates.iloc[0]) == 20
    acceptance(4, ok, f"mean accuracy {acc:.4f} vs Bayes accuracy {ref:.4f} "
                      f"(gap {abs(acc - ref):.4f}, tolerance 0.02)")
    assert ok


def test_c05_min_kernel_spectrum(acceptance):
    t0 = time.perf_counter()
    errs = {n: abs(min_kernel_profile(n).lambdas[-1] * 4 * n - 1) for n in (100, 400, 1600)}
    ok = max(errs.values()) <= 0.10
    detail = ", ".join(f"n={n}: {100 * e:.2f}%" for n, e in errs.items())
    acceptance(5, ok, f"relative error of lambda_n vs 1/(4n): {detail}; "
                      f"{time.perf_counter() - t0:.1f}s")
    assert ok


def test_c06_markov_decay(acceptance, markov):
    summary, _, runtime = markov
    p1 = summary[(summary.p == 1.0) & summary.n.isin(MARKOV_GRID)].sort_values("n")
    slope = loglog_slope(p1.n, p1["median"])
    at1000 = summary[summary.n == 1000].sort_values("p")
    diffs = np.diff(at1000["median"].to_numpy())
    monotone = bool(np.all(diffs <= 0)) and len(at1000) == 10
    chains_ok = bool((summary.chains == 200).all())
    ok = -1.1 <= slope <= -0.9 and monotone and chains_ok and runtime < 300
    acceptance(6, ok, f"p=1 slope {slope:.4f}; medians at n=1000 nonincreasing in p: {monotone}; "
                      f"{runtime:.1f}s")
    assert ok


def test_c07_prop3_bounds(acceptance, markov):
    _, detail, _ = markov
    loose_bad = int((detail.filtered_norm > detail.loose_bound).sum())
    checked = detail.refined_bound.notna()
    refined_bad = int((detail.filtered_norm[checked] > detail.refined_bound[checked]).sum())
    ok = loose_bad == 0 and refined_bad == 0
    acceptance(7, ok, f"loose bound violated on {loose_bad}/{len(detail)} instances; "
                      f"refined bound applicable on {int(checked.sum())}, violated on {refined_bad}")
    assert ok


def test_c08_oracle_equivalences(acceptance, noiseless, noisy):
    rng = np.random.default_rng(8)
    km_bad = 0
    for _ in range(100):
        n = int(rng.integers(1, 11))
        M = int(rng.integers(1, min(3, n) + 1))
        v = rng.normal(size=n)
        if not math.isclose(kmeans_1d_exact(v, M)[2], brute_sse(v, M), rel_tol=1e-9,
                            abs_tol=1e-12):
            km_bad += 1
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(2, 60))
        K = random_psd(rng, n)
        r = rng.normal(size=n)
        tau = 10 ** rng.uniform(-3, 1)
        a, f = krr_step(K, r, tau)
        a0, f0 = dense_krr_oracle(K, r, tau)
        worst = max(worst, np.linalg.norm(a - a0) / np.linalg.norm(a0),
                    np.linalg.norm(f - f0) / np.linalg.norm(f0))
    fits = pd.concat([noiseless["detail"], noisy[1]])
    monotone = bool(fits.objective_monotone.all())
    ok = km_bad == 0 and worst <= 1e-8 and monotone
    acceptance(8, ok, f"k-means mismatches {km_bad}/100; KRR worst relative error {worst:.1e}; "
                      f"objective nonincreasing on all fits of {len(fits)} suite replicates: "
                      f"{monotone}")
    assert ok


def test_c09_sobolev(acceptance):
    n = 500
    g = markov_signal(n, 1.0, 0)
    basis = min_kernel_profile(n).V
    vals, xi_err = {}, 0.0
    for a in (1, 2):
        lam, tau, x = sobolev_schedule(a, n)
        vals[a] = filtered_norm(fourier(synthetic_profile(a, n, basis), g), lam, tau)
        xi_err = max(xi_err, abs(x - n ** (-4 * a * a / (2 * a + 1))))
    ok = vals[2] < vals[1] and xi_err <= 1e-12
    acceptance(9, ok, f"filtered norm alpha=2 {vals[2]:.3e} < alpha=1 {vals[1]:.3e}; "
                      f"xi error {xi_err:.1e}")
    assert ok


def test_c10_determinism(acceptance, noiseless):
    a, b = noiseless["dirs"]
    names = sorted(p.name for p in a.glob("*.csv"))
    same = bool(names) and all((a / f).read_bytes() == (b / f).read_bytes() for f in names)
    acceptance(10, same, f"{len(names)} CSVs from two runs of `experiment noiseless --seed 7` "
                         f"byte-identical: {same}")
    assert same
