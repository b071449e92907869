"""Recovery conditions, level bounds and a brute-force feasibility oracle.

The oracle decides, for every labeling ``z``, whether levels ``mu`` exist so
that ``f_i = y_i - mu[z_i]`` is ``omega``-continuous on the sample.  With a
linear modulus that is a system of difference constraints

    mu[z_i] - mu[z_j] <= L * d_ij - (y_i - y_j)

which is feasible iff its constraint graph has no negative cycle.  A
Lipschitz function on the sample extends to the whole metric space
(McShane), so sample-level feasibility is exactly feasibility of problem
(f, mu, z) at zero loss.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .topology import check_distance_matrix, connectivity_radius, label_distance

log = logging.getLogger(__name__)

MAX_ENUMERATION = 10 ** 7


@dataclass(frozen=True)
class LinearModulus:
    """Modulus of continuity ``omega(t) = L * t``."""

    L: float

    def __post_init__(self):
        if not (self.L >= 0 and math.isfinite(self.L)):
            raise ValueError("Lipschitz constant must be finite and nonnegative")

    def __call__(self, t):
        return self.L * np.asarray(t, dtype=float) if np.ndim(t) else self.L * float(t)


def rkhs_modulus(hilbert_norm_bound: float) -> LinearModulus:
    """Modulus w.r.t. the kernel metric of any ``f`` with ``||f||_H <= bound``."""
    if hilbert_norm_bound < 0:
        raise ValueError("Hilbert norm bound must be nonnegative")
    return LinearModulus(float(hilbert_norm_bound))


def sinusoid_h1_norm(beta: float, amplitude: float = 0.75) -> float:
    """``||f'||_L2`` of ``amplitude * sin(2 pi beta x)`` on [0, 1], integer ``beta``."""
    return amplitude * 2.0 * math.pi * beta / math.sqrt(2.0)


def min_gap(mu) -> float:
    mu = np.asarray(mu, dtype=float)
    if mu.ndim == 1:
        mu = mu[:, None]
    M = mu.shape[0]
    if M < 2:
        return math.inf
    return min(float(np.linalg.norm(mu[k] - mu[l]))
               for k in range(M) for l in range(k + 1, M))


def recovery_condition(modulus, rho_min: float, mu, M: int | None = None) -> bool:
    """Strict check of ``omega(rho_min) < min_gap / (2 M)``."""
    mu = np.asarray(mu, dtype=float)
    M = len(mu) if M is None else M
    if M < 2:
        raise ValueError("recovery condition needs M >= 2")
    gap = min_gap(mu)
    if gap == 0:
        log.warning("duplicate levels: minimum gap is zero, condition cannot hold")
        return False
    return bool(modulus(rho_min) < gap / (2 * M))


def level_deviation_bound(M: int, modulus, label_dist: float, mean_f: float = 0.0) -> float:
    """``2 (M - 1) omega(label_dist) + |mean_f|``."""
    if M < 1:
        raise ValueError("M must be >= 1")
    return 2 * (M - 1) * float(modulus(label_dist)) + abs(mean_f)


@dataclass
class IdentifiabilityReport:
    rho_min: float
    label_dist: float
    min_gap: float
    condition_lhs: float
    condition_rhs: float
    condition_holds: bool
    level_bound: float


def identifiability_report(dist, z, mu, modulus, mean_f: float = 0.0) -> IdentifiabilityReport:
    M = len(mu)
    rho = connectivity_radius(dist)
    lbd = label_distance(dist, z, M)
    gap = min_gap(mu)
    lhs = float(modulus(rho))
    rhs = gap / (2 * M)
    return IdentifiabilityReport(rho, lbd, gap, lhs, rhs, lhs < rhs,
                                 level_deviation_bound(M, modulus, lbd, mean_f))


def no_negative_cycle(W: np.ndarray) -> bool:
    """Bellman-Ford from a virtual source on arcs ``b -> a`` weighted ``W[a, b]``.

    ``W[a, b]`` bounds ``mu[a] - mu[b]``; ``inf`` means no constraint.
    """
    m = W.shape[0]
    dist = np.zeros(m)
    arcs = [(b, a, W[a, b]) for a in range(m) for b in range(m)
            if a != b and np.isfinite(W[a, b])]
    for _ in range(m):
        changed = False
        for u, v, w in arcs:
            if dist[u] + w < dist[v]:
                dist[v] = dist[u] + w
                changed = True
        if not changed:
            return True
    return False


def _slack(y, dist, modulus):
    y = np.asarray(y, dtype=float)
    # C[i, j] = omega(d_ij) - (y_i - y_j) bounds mu[z_i] - mu[z_j]
    return modulus(dist) - (y[:, None] - y[None, :])


def _labeling_feasible(C, z, M, tol) -> bool:
    W = np.full((M, M), np.inf)
    for a in range(M):
        ia = z == a
        if not ia.any():
            continue
        for b in range(M):
            ib = z == b
            if ib.any():
                W[a, b] = C[np.ix_(ia, ib)].min() + tol
    if np.any(np.diag(W) < 0):
        return False
    return no_negative_cycle(W)


def feasible_labelings(y, dist, modulus, M: int, *, brute_force: bool = False,
                       tol: float = 1e-12) -> set[tuple[int, ...]]:
    """All surjective labelings in ``{0..M-1}^n`` that interpolate ``y`` exactly.

    The default search assigns labels point by point and drops a prefix as
    soon as its constraint system is infeasible; constraints only accumulate,
    so no feasible labeling is lost.  ``brute_force=True`` checks every
    labeling independently instead.
    """
    if not isinstance(modulus, LinearModulus):
        raise TypeError("feasibility oracle only supports linear moduli")
    D = check_distance_matrix(dist)
    n = D.shape[0]
    if len(y) != n:
        raise ValueError("y and dist disagree on n")
    if M ** n > MAX_ENUMERATION:
        raise ValueError(f"M**n = {M ** n} exceeds the enumeration guard {MAX_ENUMERATION}")
    C = _slack(y, D, modulus)
    out = set()
    if brute_force:
        for z in itertools.product(range(M), repeat=n):
            za = np.array(z)
            if len(set(z)) == M and _labeling_feasible(C, za, M, tol):
                out.add(z)
        return out

    z = np.full(n, -1)

    def extend(i):
        if i == n:
            if len(np.unique(z)) == M:
                out.add(tuple(int(v) for v in z))
            return
        for a in range(M):
            z[i] = a
            if _labeling_feasible(C[: i + 1, : i + 1], z[: i + 1], M, tol):
                extend(i + 1)
        z[i] = -1

    extend(0)
    return out


def canonical_labels(z) -> tuple[int, ...]:
    """Relabel by order of first appearance (a permutation-invariant key)."""
    seen: dict[int, int] = {}
    return tuple(seen.setdefault(int(v), len(seen)) for v in z)


def same_partition(z1, z2) -> bool:
    return canonical_labels(z1) == canonical_labels(z2)


@dataclass
class Theorem1Certificate:
    condition_holds: bool
    feasible: set = field(default_factory=set)
    truth_feasible: bool = False
    counterexamples: list = field(default_factory=list)

    @property
    def certified(self) -> bool:
        return self.condition_holds and self.truth_feasible and not self.counterexamples

    @property
    def message(self) -> str:
        if not self.condition_holds:
            return "condition not satisfied; no claim"
        if self.counterexamples:
            return f"COUNTEREXAMPLE: {self.counterexamples[0]}"
        return "certified"


def verify_theorem1(y, dist, z_true, mu_true, modulus) -> Theorem1Certificate:
    """Check that every zero-loss labeling matches ``z_true`` up to relabeling."""
    M = len(mu_true)
    holds = recovery_condition(modulus, connectivity_radius(dist), mu_true, M)
    feas = feasible_labelings(y, dist, modulus, M)
    cert = Theorem1Certificate(holds, feas, tuple(int(v) for v in z_true) in feas)
    if holds:
        cert.counterexamples = [z for z in sorted(feas) if not same_partition(z, z_true)]
    return cert
