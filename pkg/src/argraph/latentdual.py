"""Latent-variable dual problem solved by ADMM with the auxiliary variable ``K``.

The splitting is ``K = c (I kron Q) + T(Z)`` with ``K`` positive semidefinite
and ``c = 2 / (N - n)``. The ``Z``-step maximises the Schur-reduced log-det
minus the augmented quadratic over the group balls (projected gradient),
the ``K``-step is an eigenvalue clip, and the scaled multiplier ``U``
accumulates the constraint residual. At a fixed point ``-rho U`` is the
primal low-rank matrix ``H``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .polyalg import InfeasibleError, MatrixPoly, adjoint_D, toeplitz
from .sparsedual import (GroupLayout, SolverOptions, WeightSet, feasible_start,
                         primal_value, projected_gradient, schur_terms)

log = logging.getLogger(__name__)


@dataclass
class LatentOptions(SolverOptions):
    rho: float = 1.0
    tol_admm: float = 1e-6
    max_admm: int = 2000
    tol_null: float = 1e-6
    tol_active: float = 1e-8
    balance_ratio: float = 3.0
    # over-relaxation factor in (0, 2); 1 is plain ADMM
    relaxation: float = 1.6


@dataclass(eq=False)
class LatentSolution:
    X: np.ndarray
    H: np.ndarray
    Z: MatrixPoly
    W: np.ndarray
    Q_used: np.ndarray
    K: np.ndarray
    dual_value: float
    primal_value: float
    gap: float
    admm_iterations: int
    residuals: tuple
    converged: bool
    U: np.ndarray | None = None
    rho: float = 1.0
    history: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "X": self.X.tolist(), "H": self.H.tolist(), "Z": self.Z.to_dict(),
            "W": self.W.tolist(), "Q_used": self.Q_used.tolist(),
            "dual_value": self.dual_value, "primal_value": self.primal_value, "gap": self.gap,
            "admm_iterations": self.admm_iterations, "residuals": list(self.residuals),
            "converged": self.converged,
        }


def psd_project(K: np.ndarray) -> np.ndarray:
    """Frobenius-nearest positive semidefinite matrix (negative eigenvalues clipped)."""
    K = 0.5 * (K + K.T)
    vals, vecs = np.linalg.eigh(K)
    if vals[0] >= 0:
        return K
    out = (vecs * np.maximum(vals, 0.0)) @ vecs.T
    return 0.5 * (out + out.T)


def lowrank_weight(Q: np.ndarray, n: int, scale: float) -> np.ndarray:
    """``scale * (I_{n+1} kron Q)``."""
    return scale * np.kron(np.eye(n + 1), Q)


def recover_lowrank(Z: MatrixPoly, Q: np.ndarray, X: np.ndarray, w: WeightSet,
                    tol_null: float = 1e-6, tol_active: float = 1e-8,
                    H_init: np.ndarray | None = None, abs_floor: float = 0.0) -> np.ndarray:
    """Recover ``H`` from a dual solution by solving the stationarity equations.

    ``H = P M P^T`` where ``P`` spans the (numerical) null space of
    ``V = c (I kron Q) + T(Z)``. For every off-diagonal pair whose dual
    budget is slack, the coefficients of ``D(X + H)`` at that pair must
    vanish; these equations are solved for ``M`` in least squares (the
    correction closest to ``H_init`` when they do not pin ``M`` down) and
    ``M`` is clipped to be positive semidefinite. Diagonal groups cannot be
    slack at an optimum (``D_0(X)`` has a positive diagonal), so they are not
    used.
    """
    m, n = Z.m, Z.n
    V = lowrank_weight(Q, n, w.scale) + toeplitz(Z)
    vals, vecs = np.linalg.eigh(0.5 * (V + V.T))
    thresh = max(tol_null * max(np.abs(vals).max(), 1e-300), abs_floor)
    P = vecs[:, vals <= thresh]
    N = X.shape[0]
    r = P.shape[1]
    if r == 0:
        return np.zeros((N, N))

    lay = GroupLayout(m, n)
    budgets = w.budgets()
    sums, _ = lay.group_sums(lay.pack(Z.blocks))
    bud = budgets[lay.jl, lay.hl]
    slack = sums < bud * (1.0 - tol_active)
    jl, hl = lay.jl[slack], lay.hl[slack]

    def select(blocks):
        parts = [blocks[:, jl, hl].ravel(), blocks[1:, hl, jl].ravel()]
        return np.concatenate(parts)

    iu = np.triu_indices(r)
    cols = []
    for a, b in zip(*iu):
        E = np.zeros((r, r))
        E[a, b] = E[b, a] = 1.0
        cols.append(select(adjoint_D(P @ E @ P.T, m).blocks))
    A = np.array(cols).T if cols and len(cols[0]) else np.zeros((0, len(iu[0])))
    rhs = -select(adjoint_D(X, m).blocks) if A.shape[0] else np.zeros(0)

    if H_init is not None:
        M0 = P.T @ H_init @ P
        mu0 = M0[iu]
    else:
        mu0 = np.zeros(len(iu[0]))
    if A.shape[0]:
        mu = mu0 + np.linalg.lstsq(A, rhs - A @ mu0, rcond=None)[0]
    else:
        mu = mu0
    M = np.zeros((r, r))
    M[iu] = mu
    M = M + np.triu(M, 1).T
    M = psd_project(M)
    H = P @ M @ P.T
    return 0.5 * (H + H.T)


def solve_latent_dual(Rhat: MatrixPoly, w: WeightSet, opts: LatentOptions | None = None,
                      warm: "LatentSolution | None" = None) -> LatentSolution:
    """Solve the weighted sparse-plus-low-rank problem via its dual by ADMM.

    ``w.Q`` must be present. ``warm`` (a previous solution) seeds ``Z``,
    ``K``, ``U`` and ``rho``.
    """
    opts = opts or LatentOptions()
    if w.Q is None:
        raise ValueError("latent solve needs a low-rank weight Q")
    m, n = Rhat.m, Rhat.n
    TR = toeplitz(Rhat)
    if np.linalg.eigvalsh(TR)[0] <= 0:
        raise InfeasibleError("T(Rhat) is not positive definite")
    lay = GroupLayout(m, n)
    r_off, r_diag = lay.radii(w.budgets())
    C = lowrank_weight(w.Q, n, w.scale)

    def project(z):
        return lay.project(z, r_off, r_diag)

    if warm is not None:
        z = feasible_start(warm.Z.blocks, lay, r_off, r_diag, Rhat)
        rho = warm.rho
        U = warm.U.copy() if warm.U is not None else np.zeros_like(C)
        K = psd_project(C + toeplitz(MatrixPoly(lay.unpack(z))) + U)
    else:
        z = np.zeros(lay.size)
        rho = opts.rho
        K = psd_project(C)
        U = np.zeros_like(C)

    inner = SolverOptions(tol_pg=opts.tol_pg, max_iter=opts.max_iter,
                          backtrack_factor=opts.backtrack_factor,
                          sufficient_increase=opts.sufficient_increase, tol_rel=1e-14)
    r_pri = r_dual = np.inf
    history = []
    converged = False
    it = 0
    for it in range(1, opts.max_admm + 1):
        target = K - U - C

        def evaluate(zz, target=target, rho=rho):
            Zb = lay.unpack(zz)
            TZ = toeplitz(MatrixPoly(Zb))
            _, _, ld, X = schur_terms(TR + TZ, m)
            R = TZ - target
            val = ld + m - 0.5 * rho * float(np.vdot(R, R))
            G = adjoint_D(X - rho * R, m)
            return val, lay.coord_grad(G.blocks), (X, Zb, TZ)

        inner.tol_pg = max(1e-10, 0.1 * min(r_pri, r_dual)) if np.isfinite(r_pri) else 1e-6
        res = projected_gradient(evaluate, project, z, inner)
        z = res.z
        X, Zb, TZ = res.aux
        A = C + TZ
        K_prev = K
        Ar = opts.relaxation * A + (1.0 - opts.relaxation) * K_prev
        K = psd_project(Ar + U)
        U = U + Ar - K
        r_pri = float(np.linalg.norm(A - K))
        r_dual = rho * adjoint_D(K - K_prev, m).norm()
        history.append((r_pri, r_dual))
        if opts.verbose:
            log.info("admm %d r=%.3g s=%.3g rho=%.3g inner=%d", it, r_pri, r_dual, rho, res.iterations)
        if max(r_pri, r_dual) <= opts.tol_admm:
            converged = True
            break
        if r_pri > opts.balance_ratio * r_dual:
            rho *= 2.0
            U /= 2.0
        elif r_dual > opts.balance_ratio * r_pri:
            rho /= 2.0
            U *= 2.0

    Zp = MatrixPoly(lay.unpack(z))
    W, _, ld, X = schur_terms(TR + toeplitz(Zp), m)
    dual = ld + m
    # two primal candidates for H: the ADMM multiplier and the linear-system
    # recovery seeded by it; both are feasible, keep the smaller gap
    H_admm = psd_project(-rho * U)
    H_lin = recover_lowrank(Zp, w.Q, X, w, opts.tol_null, opts.tol_active, H_init=H_admm,
                            abs_floor=10.0 * r_pri)
    cands = [(primal_value(X, Rhat, w, H), H) for H in (H_lin, H_admm)]
    pv, H = min(cands, key=lambda c: c[0])
    return LatentSolution(
        X=X, H=H, Z=Zp, W=W, Q_used=w.Q.copy(), K=K, dual_value=dual, primal_value=pv,
        gap=pv - dual, admm_iterations=it, residuals=(r_pri, r_dual), converged=converged,
        U=U, rho=rho, history=history)
