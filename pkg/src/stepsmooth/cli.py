"""Command line entry point.

Every command writes its results under ``--out-dir`` together with a
``<name>.config.json`` sidecar holding the fully resolved arguments.
Point columns in input CSVs are ``x`` or ``x0, x1, ...``; observation
columns are ``y`` or ``y0, y1, ...``.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import re
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from .altmin import (Dataset, KRRSolver, altmin_path, objective_nonincreasing, select_tau)
from .geometry import KernelSpec, gram_matrix, pairwise_distances
from .harness.experiments import (default_n_grid, default_tau_grid, run_markov_suite,
                                  run_noiseless_suite, run_noisy_suite)
from .harness.simulate import SimulationConfig, simulate, stream
from .identifiability import (LinearModulus, feasible_labelings, recovery_condition,
                              same_partition)
from .spectral import (eigendecompose, filtered_norm, fourier, markov_signal,
                       min_kernel_profile, prop3_bound, sobolev_schedule, survival,
                       synthetic_profile, tail_exponent, xi)
from .topology import cluster_distances, connectivity_radius, label_distance, minimum_spanning_tree

log = logging.getLogger("stepsmooth")


# ---------------------------------------------------------------- helpers

def _kernel(value) -> KernelSpec:
    """Kernel from a JSON string, a JSON file path or a bare family name."""
    if isinstance(value, KernelSpec):
        return value
    if isinstance(value, dict):
        return KernelSpec.from_dict(value)
    text = str(value)
    path = Path(text)
    if not text.lstrip().startswith("{") and path.suffix == ".json" and path.exists():
        text = path.read_text()
    if text.lstrip().startswith("{"):
        return KernelSpec.from_json(text)
    return KernelSpec(text)


def _floats(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).split(",") if v.strip()]


def _ints(text) -> list[int]:
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    return [int(v) for v in str(text).split(",") if v.strip()]


def _columns(df: pd.DataFrame, prefix: str) -> list[str]:
    pat = re.compile(rf"^{prefix}\d*$")
    cols = [c for c in df.columns if pat.match(str(c))]
    if not cols:
        raise SystemExit(f"input has no '{prefix}' column (expected '{prefix}' or '{prefix}0', ...)")
    return cols


def _read_dataset(path):
    df = pd.read_csv(path, float_precision="round_trip")
    xc, yc = _columns(df, "x"), _columns(df, "y")
    y = df[yc].to_numpy(float)
    return df, xc, yc, df[xc].to_numpy(float), (y[:, 0] if len(yc) == 1 else y)


def _jsonable(v):
    if isinstance(v, KernelSpec):
        return v.to_dict()
    if isinstance(v, Path):
        return str(v)
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    return v


class Output:
    def __init__(self, args, name: str):
        self.dir = Path(args.out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.name = name
        config = {k: _jsonable(v) for k, v in sorted(vars(args).items()) if k != "func"}
        self.write_json(f"{name}.config.json", config)

    def path(self, filename: str) -> Path:
        return self.dir / filename

    def write_csv(self, filename: str, df: pd.DataFrame) -> Path:
        p = self.path(filename)
        df.to_csv(p, index=False, lineterminator="\n")
        log.info("wrote %s", p)
        return p

    def write_json(self, filename: str, obj) -> Path:
        p = self.path(filename)
        p.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")
        return p


def _stem(args, default: str) -> str:
    out = getattr(args, "out", None)
    return Path(out).stem if out else default


# ---------------------------------------------------------------- commands

def cmd_simulate(args):
    cfg = SimulationConfig(n=args.n, M=args.M, beta=args.beta, sigma2=args.sigma2,
                           seed=args.seed, replicates=1, kernel=_kernel(args.kernel))
    d = simulate(cfg, args.replicate)
    name = _stem(args, "simulate")
    out = Output(args, name)
    df = pd.DataFrame({"i": np.arange(1, d.n + 1), "x": d.X[:, 0], "y": d.y, "f_true": d.f_true,
                       "mu_true": d.mu_true[d.z_true], "z_true": d.z_true})
    out.write_csv(f"{name}.csv", df)


def _metric(args):
    return "euclidean" if args.kernel is None else _kernel(args.kernel)


def cmd_topology(args):
    df = pd.read_csv(args.input, float_precision="round_trip")
    X = df[_columns(df, "x")].to_numpy(float)
    D = pairwise_distances(X, _metric(args))
    result = {"rho_min": connectivity_radius(D),
              "mst_edges": [[i, j, w] for i, j, w in minimum_spanning_tree(D)],
              "label_distance": None, "cluster_distance_matrix": None}
    if args.label_col in df.columns:
        z = df[args.label_col].to_numpy()
        _, z = np.unique(z, return_inverse=True)
        C = cluster_distances(D, z)
        result["label_distance"] = label_distance(D, z)
        result["cluster_distance_matrix"] = C.tolist()
    name = _stem(args, "topology")
    Output(args, name).write_json(f"{name}.json", result)
    print(json.dumps(result, sort_keys=True))


def cmd_oracle(args):
    df = pd.read_csv(args.input, float_precision="round_trip")
    X = df[_columns(df, "x")].to_numpy(float)
    y = df[_columns(df, "y")[0]].to_numpy(float)
    D = pairwise_distances(X, _metric(args))
    mod = LinearModulus(args.L)
    feas = feasible_labelings(y, D, mod, args.M)
    result = {"condition_holds": None, "feasible_count": len(feas), "all_match_truth": None}
    if args.label_col in df.columns:
        z = np.unique(df[args.label_col].to_numpy(), return_inverse=True)[1]
        result["all_match_truth"] = bool(feas) and all(same_partition(f, z) for f in feas)
        if args.level_col in df.columns:
            mu = df.groupby(z)[args.level_col].first().to_numpy(float)
            result["condition_holds"] = recovery_condition(mod, connectivity_radius(D), mu, args.M)
    name = _stem(args, "oracle")
    Output(args, name).write_json(f"{name}.json", result)
    print(json.dumps(result, sort_keys=True))


def cmd_fit(args):
    df, xc, yc, X, y = _read_dataset(args.input)
    spec = _kernel(args.kernel)
    data = Dataset(X, y)
    if args.multiseq and data.p < 2:
        raise SystemExit("--multiseq needs at least two y columns")
    if not args.multiseq and data.p > 1:
        raise SystemExit("several y columns given; pass --multiseq")
    solver = KRRSolver(gram_matrix(spec, data.X))
    kw = dict(max_iter=args.max_iter, tol=args.tol)
    if args.tau is not None:
        tau, path = float(args.tau), [float(args.tau)]
    else:
        grid = default_tau_grid(solver) if args.tau_grid in (None, "auto") else _floats(args.tau_grid)
        tau = select_tau(data, spec, args.M, grid, seed=args.seed, **kw)
        path = [t for t in grid if t >= tau]
    fit = altmin_path(data, spec, args.M, path, seed=args.seed, solver=solver, **kw)[-1]
    name = _stem(args, "fit")
    out = Output(args, name)
    cols = {"i": np.arange(1, data.n + 1)}
    cols.update({c: df[c].to_numpy() for c in xc + yc})
    cols["fitted_f"] = fit.fitted_f
    cols["z"] = fit.z
    resid = data.y - fit.mu[fit.z] - (fit.fitted_f[:, None] if data.p > 1 else fit.fitted_f)
    if data.p == 1:
        cols["residual"] = resid
    else:
        cols.update({f"residual{k}": resid[:, k] for k in range(data.p)})
    out.write_csv(f"{name}.csv", pd.DataFrame(cols))
    out.write_json(f"{name}.summary.json", {
        "mu": fit.mu.tolist(), "tau": fit.tau, "iterations": fit.iterations,
        "objective_trace": list(fit.objective_trace), "converged": fit.converged,
        "objective_monotone": objective_nonincreasing(fit), "shift": fit.shift})


def _spectral_profile(spec: KernelSpec, n: int):
    if spec.family == "sobolev-spectrum":
        return synthetic_profile(spec.alpha, n)
    if spec.family == "min":
        return min_kernel_profile(n)
    return eigendecompose(gram_matrix(spec, np.arange(1, n + 1) / n, normalize=False))


def cmd_spectral(args):
    spec = _kernel(args.kernel)
    n = args.n
    prof = _spectral_profile(spec, n)
    lam = prof.lambdas
    if args.tau == "sqrt-lambda-n":
        tau = math.sqrt(lam[-1])
    elif args.tau == "sobolev":
        if spec.family != "sobolev-spectrum":
            raise SystemExit("--tau sobolev needs a sobolev-spectrum kernel")
        tau = sobolev_schedule(spec.alpha, n)[1]
    else:
        tau = float(args.tau)
    signals = []
    if args.signal.startswith("markov:"):
        p = float(args.signal.split(":", 1)[1])
        for s in range(args.seeds):
            signals.append((s, p, markov_signal(n, p, stream(args.seed, n, s))))
    else:
        g = pd.read_csv(args.signal, float_precision="round_trip").iloc[:, -1].to_numpy(float)
        if g.size != n:
            raise SystemExit(f"signal has {g.size} entries, --n is {n}")
        signals.append((args.seed, float("nan"), g))
    ts = np.geomspace(lam[lam > 0][-1], lam[0], args.survival_points, endpoint=False)
    rows = []
    for s, p, g in signals:
        fv = fourier(prof, g)
        beta = tail_exponent(fv, lam)
        loose, refined = prop3_bound(fv, lam, tau, beta)
        row = dict(seed=s, p=p, n=n, tau=tau, xi=xi(fv, lam, tau), beta=beta,
                   filtered_norm=filtered_norm(fv, lam, tau), loose_bound=loose,
                   refined_bound=np.nan if refined is None else refined)
        row.update({f"S(t={t:.6e})": v for t, v in zip(ts, survival(fv, lam, ts))})
        rows.append(row)
    name = _stem(args, "spectral")
    Output(args, name).write_csv(f"{name}.csv", pd.DataFrame(rows))


def cmd_experiment(args):
    n_grid = default_n_grid() if args.n_grid is None else _ints(args.n_grid)
    name = args.out or args.which
    out = Output(args, name)
    progress = lambda n: log.info("%s: finished n=%d", args.which, n)
    tau = None if args.tau is None else float(args.tau)
    kernel = _kernel(args.kernel)
    if args.which == "noiseless":
        settings = [tuple(float(v) for v in s.split(":")) for s in args.settings.split(",")]
        settings = [(int(M), b) for M, b in settings]
        summary, detail = run_noiseless_suite(settings, n_grid, args.replicates, args.seed, tau,
                                              args.threads, kernel, progress)
    elif args.which == "noisy":
        summary, detail = run_noisy_suite(args.M, args.beta, _floats(args.sigma2s), n_grid,
                                          args.replicates, args.seed, tau, args.threads,
                                          kernel, progress)
    else:
        grid = (100, 200, 400, 800, 1600) if args.n_grid is None else n_grid
        ps = [k / 10 for k in range(1, 11)] if args.ps is None else _floats(args.ps)
        summary, detail, surv = run_markov_suite(grid, ps, args.chains, args.seed,
                                                 args.survival_n, progress=progress)
        out.write_csv(f"{name}_survival.csv", surv)
    out.write_csv(f"{name}_summary.csv", summary)
    out.write_csv(f"{name}_detail.csv", detail)


# ---------------------------------------------------------------- parser

def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=0, help="base random seed")
    g.add_argument("--out-dir", default=".", help="directory for all outputs")
    g.add_argument("--threads", type=int, default=1, help="worker threads for experiment cells")
    g.add_argument("--config", default=None, help="JSON file of option defaults (flag names)")
    g.add_argument("-v", "--verbose", action="count", default=0)
    return p


def build_parser(defaults: dict | None = None) -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="stepsmooth", parents=[common],
                                     description="Step plus smooth decomposition toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="sinusoid plus levels data")
    p.add_argument("--n", type=int, default=400)
    p.add_argument("--M", type=int, default=2)
    p.add_argument("--beta", type=float, default=1.0, help="sinusoid frequency")
    p.add_argument("--sigma2", type=float, default=0.0, help="noise variance")
    p.add_argument("--replicate", type=int, default=0)
    p.add_argument("--kernel", default="min")
    p.add_argument("--out", default=None, help="output file name (stem is used)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("topology", parents=[common], help="connectivity and label distance")
    p.add_argument("--input", required=True)
    p.add_argument("--kernel", default=None, help="kernel metric; euclidean if omitted")
    p.add_argument("--label-col", default="z_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_topology)

    p = sub.add_parser("oracle", parents=[common], help="feasible labelings of noiseless data")
    p.add_argument("--input", required=True)
    p.add_argument("--L", type=float, required=True, help="Lipschitz constant of the modulus")
    p.add_argument("--M", type=int, required=True)
    p.add_argument("--kernel", default=None, help="kernel metric; euclidean if omitted")
    p.add_argument("--label-col", default="z_true")
    p.add_argument("--level-col", default="mu_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("fit", parents=[common], help="AltMin decomposition of a CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--kernel", default="min")
    p.add_argument("--M", type=int, required=True)
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--tau-grid", default=None, help="comma list, or 'auto'")
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--multiseq", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("spectral", parents=[common], help="filtered norm and tail bounds")
    p.add_argument("--kernel", default="min")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--signal", default="markov:1.0", help="markov:p or a CSV path")
    p.add_argument("--tau", default="sqrt-lambda-n", help="value, sqrt-lambda-n or sobolev")
    p.add_argument("--seeds", type=int, default=20, help="number of Markov chains")
    p.add_argument("--survival-points", type=int, default=10)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_spectral)

    p = sub.add_parser("experiment", parents=[common], help="simulation studies")
    p.add_argument("which", choices=["noiseless", "noisy", "markov"])
    p.add_argument("--n-grid", default=None, help="comma list of n")
    p.add_argument("--replicates", type=int, default=20)
    p.add_argument("--tau", type=float, default=None, help="fixed tau (default: holdout)")
    p.add_argument("--kernel", default="min")
    p.add_argument("--settings", default="2:1,2:2,3:2,3:3", help="noiseless M:beta pairs")
    p.add_argument("--M", type=int, default=3)
    p.add_argument("--beta", type=float, default=3.0)
    p.add_argument("--sigma2s", default="0,0.05,0.1,0.15")
    p.add_argument("--chains", type=int, default=200)
    p.add_argument("--ps", default=None, help="Markov flip probabilities")
    p.add_argument("--survival-n", type=int, default=1000)
    p.add_argument("--out", default=None, help="output file stem")
    p.set_defaults(func=cmd_experiment)

    if defaults:
        for sp in sub.choices.values():
            known = {a.dest for a in sp._actions}
            sp.set_defaults(**{k: v for k, v in defaults.items() if k in known})
    return parser


def _load_config(argv) -> dict:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", default=None)
    ns, _ = pre.parse_known_args(argv)
    if not ns.config:
        return {}
    raw = json.loads(Path(ns.config).read_text())
    return {k.lstrip("-").replace("-", "_"): v for k, v in raw.items()}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser(_load_config(argv)).parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    args.func(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
