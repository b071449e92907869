"""Data generators for the sinusoid-plus-levels simulations."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from ..altmin import Dataset
from ..geometry import KernelSpec
from ..identifiability import sinusoid_h1_norm


def stream(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for ``(seed, *keys)``; order of use is irrelevant."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, keys)]))


@dataclass
class SimulationConfig:
    n: int = 400
    M: int = 2
    beta: float = 1.0
    sigma2: float = 0.0
    seed: int = 0
    replicates: int = 1
    kernel: KernelSpec = field(default_factory=lambda: KernelSpec("min"))
    tau: Optional[float] = None  # None: holdout selection over the default grid

    def __post_init__(self):
        if not self.n >= self.M >= 1:
            raise ValueError("need n >= M >= 1")
        if self.sigma2 < 0 or self.beta < 0:
            raise ValueError("sigma2 and beta must be nonnegative")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kernel"] = self.kernel.to_dict()
        return d


def levels(M: int) -> np.ndarray:
    """Unit-gap levels centred at zero: ``k - (M + 1) / 2`` for ``k = 1..M``."""
    return np.arange(1, M + 1) - (M + 1) / 2.0


def sinusoid(x, beta: float, amplitude: float = 0.75):
    return amplitude * np.sin(2.0 * np.pi * beta * np.asarray(x, dtype=float))


def simulate(config: SimulationConfig, replicate: int = 0) -> Dataset:
    """Equispaced ``x_i = i / n`` with uniform surjective labels plus noise."""
    rng = stream(config.seed, replicate)
    n, M = config.n, config.M
    x = np.arange(1, n + 1) / n
    while True:
        z = rng.integers(0, M, size=n)
        if np.unique(z).size == M:
            break
    mu = levels(M)
    f = sinusoid(x, config.beta)
    sigma = math.sqrt(config.sigma2)
    eps = rng.normal(0.0, sigma, size=n) if sigma > 0 else np.zeros(n)
    return Dataset(x, f + mu[z] + eps, f, mu, z, config.sigma2)


def worst_case_bounds(n: int, M: int, beta: float):
    """Sinusoid modulus at the min-kernel connectivity radius ``n^(-1/2)``.

    Returns ``(omega_rho, condition_holds, prop2)`` where ``prop2(label_dist,
    mean_f=0)`` evaluates the level-deviation bound.
    """
    L = sinusoid_h1_norm(beta)
    omega_rho = L / math.sqrt(n)
    holds = omega_rho < 1.0 / (2 * M)

    def prop2(label_dist: float, mean_f: float = 0.0) -> float:
        return 2 * (M - 1) * L * label_dist + abs(mean_f)

    return omega_rho, holds, prop2


@dataclass
class OracleInstance:
    X: np.ndarray
    y: np.ndarray
    dist: np.ndarray
    z: np.ndarray
    mu: np.ndarray
    L: float


def oracle_instance(seed: int, n: int, M: int, dim: int = 2, slack: Optional[float] = None
                    ) -> OracleInstance:
    """Small noiseless instance with random geometry and a Lipschitz ``f``.

    Points are uniform in ``[0, 1]^dim`` (euclidean metric), levels are
    unit-gap, and ``f(x) = L (0.6 u.x + 0.4 |x - c|)`` is ``L``-Lipschitz.
    ``L`` is set to ``slack / (2 M rho_min)``, so the recovery condition
    holds iff ``slack < 1``; by default ``slack`` is drawn from [0.2, 0.95].
    """
    from ..geometry import pairwise_distances
    from ..topology import connectivity_radius

    rng = stream(seed, n, M, dim)
    X = rng.uniform(size=(n, dim))
    dist = pairwise_distances(X)
    while True:
        z = rng.integers(0, M, size=n)
        if np.unique(z).size == M:
            break
    if slack is None:
        slack = rng.uniform(0.2, 0.95)
    L = slack / (2 * M * connectivity_radius(dist))
    u = rng.normal(size=dim)
    u /= np.linalg.norm(u)
    c = rng.uniform(size=dim)
    f = L * (0.6 * X @ u + 0.4 * np.linalg.norm(X - c, axis=1))
    mu = levels(M)
    return OracleInstance(X, f + mu[z], dist, z, mu, L)
