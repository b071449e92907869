"""Step plus smooth signal decomposition.

Observations ``y_i = f(x_i) + mu[z_i] + noise`` are split into a smooth
RKHS component ``f`` and a piecewise-constant component with ``M`` levels,
by alternating kernel ridge regression with exact k-means.
"""
from .altmin import (Dataset, DecompositionFit, altmin_fit, altmin_fit_multiseq, krr_step,
                     predict_f, select_tau, zero_mean_adjust)
from .geometry import KernelSpec, gram_matrix, pairwise_distances
from .identifiability import LinearModulus, feasible_labelings, recovery_condition
from .topology import connectivity_radius, label_distance

__version__ = "0.1.0"

__all__ = [
    "Dataset", "DecompositionFit", "KernelSpec", "LinearModulus", "altmin_fit",
    "altmin_fit_multiseq", "connectivity_radius", "feasible_labelings", "gram_matrix",
    "krr_step", "label_distance", "pairwise_distances", "predict_f", "recovery_condition",
    "select_tau", "zero_mean_adjust",
]
