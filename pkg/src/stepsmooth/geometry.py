"""Kernels, kernel-induced metrics and Gram matrices.

Point clouds are plain numpy arrays of shape ``(n,)`` or ``(n, d)``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

_FAMILIES = ("min", "gaussian", "sobolev-spectrum")
_ALIASES = {"synthetic-spectrum": "sobolev-spectrum", "sobolev": "sobolev-spectrum"}


class KernelDomainError(ValueError):
    """Raised when a kernel is evaluated outside of its domain."""


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus parameters.

    ``family`` is one of ``"min"``, ``"gaussian"`` (needs ``gamma``) or
    ``"sobolev-spectrum"`` (needs ``alpha``). The last one has no pointwise
    form; it only produces eigenvalue sequences ``i ** (-2 * alpha)``.
    """

    family: str = "min"
    gamma: Optional[float] = None
    alpha: Optional[float] = None

    def __post_init__(self):
        family = _ALIASES.get(self.family, self.family)
        if family not in _FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        object.__setattr__(self, "family", family)
        if family == "gaussian" and not (self.gamma is not None and self.gamma > 0):
            raise ValueError("gaussian kernel needs gamma > 0")
        if family == "sobolev-spectrum" and not (self.alpha is not None and self.alpha > 0):
            raise ValueError("sobolev-spectrum needs alpha > 0")

    @property
    def pointwise(self) -> bool:
        return self.family != "sobolev-spectrum"

    def to_dict(self) -> dict:
        out = {"family": self.family}
        if self.gamma is not None:
            out["gamma"] = self.gamma
        if self.alpha is not None:
            out["alpha"] = self.alpha
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "KernelSpec":
        return cls(family=d["family"], gamma=d.get("gamma"), alpha=d.get("alpha"))

    @classmethod
    def from_json(cls, s: str) -> "KernelSpec":
        return cls.from_dict(json.loads(s))


MIN_KERNEL = KernelSpec("min")


def as_points(X) -> np.ndarray:
    """Return ``X`` as an ``(n, d)`` float array."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 0:
        X = X.reshape(1, 1)
    elif X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] < 1:
        raise ValueError("point cloud must be a non-empty (n,) or (n, d) array")
    return X


def _check_domain(spec: KernelSpec, X: np.ndarray) -> None:
    if not spec.pointwise:
        raise KernelDomainError("sobolev-spectrum kernel has no pointwise evaluation")
    if spec.family == "min":
        if X.shape[1] != 1:
            raise KernelDomainError("min kernel is defined on scalar inputs only")
        bad = np.flatnonzero((X[:, 0] < 0) | (X[:, 0] > 1) | ~np.isfinite(X[:, 0]))
        if bad.size:
            raise KernelDomainError(
                f"min kernel input outside [0, 1] at index {int(bad[0])}: {X[bad[0], 0]}")


def cross_kernel(spec: KernelSpec, A, B) -> np.ndarray:
    """Unscaled kernel values ``K(a_i, b_j)`` as an ``(len(A), len(B))`` array."""
    A, B = as_points(A), as_points(B)
    _check_domain(spec, A)
    _check_domain(spec, B)
    if A.shape[1] != B.shape[1]:
        raise ValueError("point dimension mismatch")
    if spec.family == "min":
        return np.minimum.outer(A[:, 0], B[:, 0])
    sq = (np.sum(A ** 2, axis=1)[:, None] + np.sum(B ** 2, axis=1)[None, :]
          - 2.0 * A @ B.T)
    return np.exp(-spec.gamma * np.maximum(sq, 0.0))


def eval_kernel(spec: KernelSpec, x, x2) -> float:
    return float(cross_kernel(spec, np.atleast_1d(x)[None, :], np.atleast_1d(x2)[None, :])[0, 0])


def kernel_metric(spec: KernelSpec, x, x2) -> float:
    """Distance ``||K(x, .) - K(x2, .)||`` in the RKHS of ``spec``."""
    pts = np.vstack([np.atleast_1d(np.asarray(x, dtype=float)),
                     np.atleast_1d(np.asarray(x2, dtype=float))])
    G = cross_kernel(spec, pts, pts)
    return float(_radicand_sqrt(G[0, 0] - 2.0 * G[0, 1] + G[1, 1]))


def _radicand_sqrt(r):
    r = np.asarray(r, dtype=float)
    if np.any(r < -1e-12):
        raise ValueError(f"negative kernel-metric radicand {r.min():.3e}; kernel is not PSD")
    return np.sqrt(np.maximum(r, 0.0))


def gram_matrix(spec: KernelSpec, X, normalize: bool = True) -> np.ndarray:
    """Kernel matrix of the point cloud ``X``.

    With ``normalize=True`` (the KRR convention) entry ``(i, j)`` is
    ``K(x_i, x_j) / n``; otherwise the raw kernel values are returned.
    """
    X = as_points(X)
    n = X.shape[0]
    G = cross_kernel(spec, X, X)
    iu = np.triu_indices(n, 1)
    G[(iu[1], iu[0])] = G[iu]
    return G / n if normalize else G


def pairwise_distances(X, metric: Union[str, KernelSpec] = "euclidean") -> np.ndarray:
    """Dense distance matrix under the euclidean or a kernel metric."""
    X = as_points(X)
    if isinstance(metric, KernelSpec):
        G = gram_matrix(metric, X, normalize=False)
        d = np.diag(G)
        D = _radicand_sqrt(d[:, None] - 2.0 * G + d[None, :])
    elif metric == "euclidean":
        diff = X[:, None, :] - X[None, :, :]
        D = np.sqrt(np.sum(diff ** 2, axis=-1))
    else:
        raise ValueError(f"unknown metric {metric!r}")
    D = np.triu(D, 1)
    return D + D.T
