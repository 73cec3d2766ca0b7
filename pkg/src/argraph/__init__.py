"""Sparse and latent-variable AR graphical models estimated by empirical-Bayes reweighting."""

__version__ = "0.1.0"

from .polyalg import MatrixPoly, InfeasibleError, adjoint_D, toeplitz, eval_poly
from .tsdata import TimeSeries, covariance_lags, load_timeseries
from .armodel import random_sparse_inverse, random_latent_inverse, simulate, exact_lags
from .sparsedual import WeightSet, solve_sparse_dual
from .latentdual import solve_latent_dual
from .ebayes import EBConfig, EstimateResult, run_sparse_eb, run_latent_eb
from .evalx import evaluate, complexity_C

__all__ = [
    "MatrixPoly", "InfeasibleError", "adjoint_D", "toeplitz", "eval_poly",
    "TimeSeries", "covariance_lags", "load_timeseries",
    "random_sparse_inverse", "random_latent_inverse", "simulate", "exact_lags",
    "WeightSet", "solve_sparse_dual", "solve_latent_dual",
    "EBConfig", "EstimateResult", "run_sparse_eb", "run_latent_eb",
    "evaluate", "complexity_C",
]
