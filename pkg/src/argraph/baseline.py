"""Fixed-weight baseline: uniform-penalty solves over a grid, ranked by BIC.

Sparse candidates use a uniform weight ``gamma`` on off-diagonal groups (the
diagonal gets a negligible ``1e-8 gamma``); latent candidates add
``Q = gamma_L I``. The selected model minimises

    (N - n) * (-log|X_00| + <T(Rhat), X>) + k * log(N - n)

where ``k`` is the free-parameter count of the partial-coherence-thresholded
support (plus the thresholded rank of the low-rank part).
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from .ebayes import EstimateResult
from .evalx import (PC_THRESHOLD, SV_THRESHOLD, numerical_rank, n_params,
                    partial_coherence, rel_errors, support_from_pc)
from .latentdual import LatentOptions, solve_latent_dual
from .polyalg import MatrixPoly, adjoint_D, logdet_pd, toeplitz
from .sparsedual import SolverOptions, WeightSet, solve_sparse_dual

log = logging.getLogger(__name__)

DIAG_FLOOR = 1e-8
# candidates are only ranked, so the latent solves can stop earlier
BASELINE_TOL_ADMM = 1e-5


@dataclass
class GridSpec:
    """Regularization grid: sparse ``gammas`` or latent ``(gamma_S, gamma_L)`` pairs."""

    gammas: list = field(default_factory=list)
    pairs: list | None = None
    pc_threshold: float = PC_THRESHOLD
    sv_threshold: float = SV_THRESHOLD

    def __post_init__(self):
        pts = self.gammas if self.pairs is None else [g for p in self.pairs for g in p]
        if not pts:
            raise ValueError("grid is empty")
        if any(g <= 0 for g in pts):
            raise ValueError("grid values must be positive")

    @property
    def latent(self) -> bool:
        return self.pairs is not None


def solve_fixed(Rhat: MatrixPoly, Nn: int, gamma: float, gamma_L: float | None = None,
                opts: SolverOptions | None = None, warm=None) -> EstimateResult:
    """Uniform-weight estimate; latent when ``gamma_L`` is given."""
    if gamma <= 0 or (gamma_L is not None and gamma_L <= 0):
        raise ValueError("gamma and gamma_L must be positive")
    m = Rhat.m
    if gamma_L is None:
        w = WeightSet.uniform(m, gamma, Nn, diag=DIAG_FLOOR * gamma)
        Z0 = None if warm is None else warm.Z
        sol = solve_sparse_dual(Rhat, w, opts, Z0=Z0)
        return EstimateResult(
            mode="sparse", X=sol.X, S_hat=adjoint_D(sol.X, m), iterations=sol.iterations,
            gap=sol.gap, converged=sol.converged, label="fixed",
            extra={"gamma": gamma}, raw=sol)
    w = WeightSet.uniform(m, gamma, Nn, diag=DIAG_FLOOR * gamma, Q=gamma_L * np.eye(m))
    lopts = opts if isinstance(opts, LatentOptions) else LatentOptions(tol_admm=BASELINE_TOL_ADMM)
    sol = solve_latent_dual(Rhat, w, lopts, warm=warm)
    return EstimateResult(
        mode="latent", X=sol.X, H=sol.H, S_hat=adjoint_D(sol.X + sol.H, m),
        L_hat=adjoint_D(sol.H, m), iterations=sol.admm_iterations, gap=sol.gap,
        converged=sol.converged, label="fixed", extra={"gamma": gamma, "gamma_L": gamma_L},
        raw=sol)


def thresholded_structure(est: EstimateResult, pc_threshold: float = PC_THRESHOLD,
                          sv_threshold: float = SV_THRESHOLD):
    """``(support, rank)`` after thresholding partial coherence and singular values."""
    sup = support_from_pc(partial_coherence(est.S_hat), pc_threshold)
    rank = 0 if est.L_hat is None else numerical_rank(est.L_hat, sv_threshold)
    return sup, rank


def neg_loglik(X: np.ndarray, Rhat: MatrixPoly) -> float:
    """Scaled negative log-likelihood ``-log|X_00| + <T(Rhat), X>``."""
    m = Rhat.m
    return -logdet_pd(X[:m, :m]) + float(np.vdot(toeplitz(Rhat), X))


def bic_score(est: EstimateResult, Rhat: MatrixPoly, Nn: int,
              pc_threshold: float = PC_THRESHOLD, sv_threshold: float = SV_THRESHOLD):
    """Return ``(bic, support, rank, k)``."""
    # Sigma - Lambda = Delta X Delta^*, so the likelihood only sees X
    sup, rank = thresholded_structure(est, pc_threshold, sv_threshold)
    k = n_params(sup, rank, Rhat.m, Rhat.n)
    return Nn * neg_loglik(est.X, Rhat) + k * np.log(Nn), sup, rank, k


def rank_by_bic(results: list, Rhat: MatrixPoly, Nn: int, pc_threshold: float = PC_THRESHOLD,
                sv_threshold: float = SV_THRESHOLD, truth=None):
    """Index of the lowest-BIC candidate and the full score table (list of dicts)."""
    if not results:
        raise ValueError("need at least one candidate")
    table = []
    for est in results:
        bic, sup, rank, _ = bic_score(est, Rhat, Nn, pc_threshold, sv_threshold)
        row = {"gamma": est.extra.get("gamma"), "gamma_L": est.extra.get("gamma_L"),
               "bic": bic, "support_size": len(sup), "rank": rank}
        if truth is not None:
            row["e"] = rel_errors(est.S_hat, est.L_hat, truth.S, truth.L)[0]
        table.append(row)
    best = int(np.argmin([r["bic"] for r in table]))
    return best, table


def gamma_max(Rhat: MatrixPoly, Nn: int, pc_threshold: float = PC_THRESHOLD,
              opts: SolverOptions | None = None, rel_tol: float = 1e-2) -> float:
    """Smallest uniform ``gamma`` whose thresholded support is empty (doubling, then bisection)."""

    def empty(g, warm=None):
        est = solve_fixed(Rhat, Nn, g, opts=opts, warm=warm)
        return not support_from_pc(partial_coherence(est.S_hat), pc_threshold), est

    if Rhat.m == 1:
        return 1.0
    hi = 1.0
    ok, _ = empty(hi)
    lo = 0.0
    while not ok:
        lo, hi = hi, 2.0 * hi
        ok, _ = empty(hi)
        if hi > 1e12:
            raise RuntimeError("could not find a gamma giving an empty support")
    if lo == 0.0:
        lo = hi
        while ok and lo > 1e-12:
            hi, lo = lo, 0.5 * lo
            ok, _ = empty(lo)
        if ok:
            return lo
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        ok, _ = empty(mid)
        lo, hi = (lo, mid) if ok else (mid, hi)
    return hi


def sparse_grid(Rhat: MatrixPoly, Nn: int, points: int = 9, span: float = 1e-3,
                pc_threshold: float = PC_THRESHOLD, gmax: float | None = None) -> GridSpec:
    """``points`` log-spaced values over ``[gamma_max * span, gamma_max]``."""
    gm = gamma_max(Rhat, Nn, pc_threshold) if gmax is None else gmax
    return GridSpec(gammas=list(np.geomspace(gm * span, gm, points)), pc_threshold=pc_threshold)


def gamma_L_max(Rhat: MatrixPoly, Nn: int, gamma: float, opts: SolverOptions | None = None) -> float:
    """Smallest ``gamma_L`` at which the latent solve returns ``H = 0``.

    The sparse dual optimum ``Z*`` stays optimal once
    ``2/(N-n) gamma_L I + T(Z*)`` is positive semidefinite.
    """
    est = solve_fixed(Rhat, Nn, gamma, opts=opts)
    lam = float(np.linalg.eigvalsh(toeplitz(est.raw.Z))[0])
    return max(-lam, 1e-12) * Nn / 2.0


def latent_grid(Rhat: MatrixPoly, Nn: int, size: int = 4, span_S: float = 1e-2,
                span_L: float = 1e-2, pc_threshold: float = PC_THRESHOLD,
                sv_threshold: float = SV_THRESHOLD) -> GridSpec:
    """``size x size`` grid running from (diagonal S, large rank) to (sparse S, rank 0).

    ``gamma_S`` spans ``[gamma_max * span_S, gamma_max]``; for each, ``gamma_L``
    spans ``[g_L * span_L, g_L]`` with ``g_L`` the rank-0 threshold.
    """
    gm = gamma_max(Rhat, Nn, pc_threshold)
    pairs = []
    for gs in np.geomspace(gm * span_S, gm, size):
        gl = gamma_L_max(Rhat, Nn, gs)
        pairs += [(float(gs), float(g)) for g in np.geomspace(gl * span_L, gl, size)]
    return GridSpec(pairs=pairs, pc_threshold=pc_threshold, sv_threshold=sv_threshold)


def run_baseline(Rhat: MatrixPoly, Nn: int, grid: GridSpec, opts=None, truth=None):
    """Solve every grid point and return ``(selected EstimateResult, score table)``."""
    results = []
    warm = None
    if grid.latent:
        # walk each gamma_L path downward from the rank-0 end, warm-starting
        order = sorted(range(len(grid.pairs)), key=lambda i: (grid.pairs[i][0], -grid.pairs[i][1]))
        slots = [None] * len(order)
        last_gs = None
        for i in order:
            gs, gl = grid.pairs[i]
            if gs != last_gs:
                warm, last_gs = None, gs
            est = solve_fixed(Rhat, Nn, gs, gl, opts=opts, warm=warm)
            warm = est.raw
            slots[i] = est
        results = slots
    else:
        # decreasing gamma so each solve starts near the previous optimum
        for g in sorted(grid.gammas, reverse=True):
            est = solve_fixed(Rhat, Nn, g, opts=opts, warm=warm)
            warm = est.raw
            results.append(est)
    best, table = rank_by_bic(results, Rhat, Nn, grid.pc_threshold, grid.sv_threshold, truth)
    sel = results[best]
    sel.extra["grid_points"] = len(results)
    return sel, table


def write_score_table(table: list, path) -> None:
    cols = ["gamma", "gamma_L", "bic", "support_size", "rank", "e"]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols, extrasaction="ignore")
        w.writeheader()
        for row in table:
            w.writerow({c: row.get(c, "") for c in cols})
