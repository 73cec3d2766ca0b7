"""Weighted sparse dual problem: projected gradient on the Schur-reduced objective.

The dual variable ``W`` is eliminated exactly: for fixed ``Z`` the best ``W``
is the Schur complement of the trailing block of ``T(Rhat + Z)``. What is
left is a smooth concave function of ``Z`` over a product of weighted l1
balls, one per index pair, which is maximised by projected gradient ascent
with Barzilai-Borwein trial steps and monotone backtracking.

Dual variables are handled in "group coordinates": for each pair ``j > h``
the ``2n + 1`` free numbers ``(Z_0)_jh, (Z_k)_jh, (Z_k)_hj`` (the first
counted twice in the budget because ``Z_0`` is symmetric), and for each
``j`` the ``n + 1`` numbers ``(Z_k)_jj``. Gradients are expressed in the
same coordinates so that the projection is Euclidean there.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .polyalg import (InfeasibleError, MatrixPoly, adjoint_D, block_schur,
                      group_maxnorms, logdet_pd, toeplitz)

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class WeightSet:
    """Sparsity weights ``gamma_jh`` (symmetric ``m x m``; ``j >= h`` used),
    optional low-rank weight ``Q`` and the effective sample count ``N - n``."""

    gammas: np.ndarray
    Nn: int
    Q: np.ndarray | None = None

    def __post_init__(self):
        g = np.asarray(self.gammas, dtype=float)
        g = np.tril(g) + np.tril(g, -1).T
        if np.any(g <= 0):
            raise ValueError("all gamma_jh must be positive")
        object.__setattr__(self, "gammas", g)
        if self.Q is not None:
            Q = np.asarray(self.Q, dtype=float)
            Q = 0.5 * (Q + Q.T)
            if np.linalg.eigvalsh(Q)[0] <= 0:
                raise ValueError("Q must be positive definite")
            object.__setattr__(self, "Q", Q)
        if self.Nn < 1:
            raise ValueError("N - n must be at least 1")

    @property
    def m(self) -> int:
        return self.gammas.shape[0]

    @property
    def scale(self) -> float:
        """``2 / (N - n)``: the factor between the likelihood and the penalties."""
        return 2.0 / self.Nn

    def budgets(self) -> np.ndarray:
        """Symmetric ``m x m`` array of dual l1 budgets ``2 gamma_jh / (N - n)``."""
        return self.scale * self.gammas

    def penalty(self, S: MatrixPoly) -> float:
        """``sum_{j >= h} gamma_jh q_jh(S)`` (unscaled)."""
        q = group_maxnorms(S)
        return float(np.tril(self.gammas * q).sum())

    @classmethod
    def uniform(cls, m: int, gamma: float, Nn: int, diag: float | None = None,
                Q=None) -> "WeightSet":
        g = np.full((m, m), float(gamma))
        if diag is not None:
            np.fill_diagonal(g, diag)
        return cls(g, Nn, Q)


@dataclass
class SolverOptions:
    tol_pg: float = 1e-7
    max_iter: int = 5000
    backtrack_factor: float = 0.5
    sufficient_increase: float = 1e-4
    tol_rel: float = 1e-10
    # relative duality gap at which the solve is declared converged
    tol_gap: float = 1e-10
    verbose: bool = False


@dataclass(eq=False)
class SparseSolution:
    X: np.ndarray
    Z: MatrixPoly
    W: np.ndarray
    dual_value: float
    primal_value: float
    gap: float
    iterations: int
    converged: bool
    pg_norm: float = float("nan")

    def to_dict(self) -> dict:
        return {
            "X": self.X.tolist(), "Z": self.Z.to_dict(), "W": self.W.tolist(),
            "dual_value": self.dual_value, "primal_value": self.primal_value,
            "gap": self.gap, "iterations": self.iterations, "converged": self.converged,
        }


# ---------------------------------------------------------------------------
# group coordinates


class GroupLayout:
    """Packing between ``MatrixPoly`` blocks and per-group coordinate vectors."""

    def __init__(self, m: int, n: int):
        self.m, self.n = m, n
        self.jl, self.hl = np.tril_indices(m, -1)
        self.P = len(self.jl)
        self.d_off = 2 * n + 1
        self.d_diag = n + 1
        self.w_off = np.ones(self.d_off)
        self.w_off[0] = 2.0
        self.size = self.P * self.d_off + m * self.d_diag

    def pack(self, blocks: np.ndarray) -> np.ndarray:
        jl, hl, m = self.jl, self.hl, self.m
        off = np.concatenate([blocks[:, jl, hl].T, blocks[1:, hl, jl].T], axis=1)
        di = np.arange(m)
        diag = blocks[:, di, di].T
        return np.concatenate([off.ravel(), diag.ravel()])

    def unpack(self, z: np.ndarray) -> np.ndarray:
        m, n, jl, hl = self.m, self.n, self.jl, self.hl
        off = z[:self.P * self.d_off].reshape(self.P, self.d_off)
        diag = z[self.P * self.d_off:].reshape(m, self.d_diag)
        b = np.zeros((n + 1, m, m))
        b[0, jl, hl] = off[:, 0]
        b[0, hl, jl] = off[:, 0]
        b[1:, jl, hl] = off[:, 1:n + 1].T
        b[1:, hl, jl] = off[:, n + 1:].T
        di = np.arange(m)
        b[:, di, di] = diag.T
        return b

    def coord_grad(self, G: np.ndarray) -> np.ndarray:
        """Gradient in group coordinates from the trace-inner-product gradient ``G``."""
        Gs = G.copy()
        Gs[0] = G[0] + G[0].T
        di = np.arange(self.m)
        Gs[0, di, di] = G[0, di, di]
        return self.pack(Gs)

    def radii(self, budgets: np.ndarray):
        return budgets[self.jl, self.hl], np.diag(budgets).copy()

    def project(self, z: np.ndarray, r_off: np.ndarray, r_diag: np.ndarray) -> np.ndarray:
        k = self.P * self.d_off
        off = z[:k].reshape(self.P, self.d_off)
        diag = z[k:].reshape(self.m, self.d_diag)
        off = project_weighted_l1(off, self.w_off, r_off)
        diag = project_weighted_l1(diag, np.ones(self.d_diag), r_diag)
        return np.concatenate([off.ravel(), diag.ravel()])

    def group_sums(self, z: np.ndarray):
        k = self.P * self.d_off
        off = np.abs(z[:k].reshape(self.P, self.d_off)) @ self.w_off
        diag = np.abs(z[k:].reshape(self.m, self.d_diag)).sum(axis=1)
        return off, diag


def project_weighted_l1(V: np.ndarray, w: np.ndarray, radius) -> np.ndarray:
    """Row-wise Euclidean projection onto ``{z : sum_i w_i |z_i| <= radius}``.

    ``V`` is ``(G, d)``; ``w`` is ``(d,)`` with positive entries; ``radius``
    is a scalar or ``(G,)``. Rows already inside their ball are returned
    unchanged. Sort-based threshold search, ``O(d log d)`` per row.
    """
    V = np.atleast_2d(np.asarray(V, dtype=float))
    G, d = V.shape
    w = np.broadcast_to(np.asarray(w, dtype=float), (G, d))
    radius = np.broadcast_to(np.asarray(radius, dtype=float), (G,))
    if G == 0 or d == 0:
        return V.copy()
    a = np.abs(V)
    inside = (w * a).sum(axis=1) <= radius
    if inside.all():
        return V.copy()
    ratio = a / w
    order = np.argsort(-ratio, axis=1, kind="stable")
    a_s = np.take_along_axis(a, order, axis=1)
    w_s = np.take_along_axis(w, order, axis=1)
    r_s = np.take_along_axis(ratio, order, axis=1)
    lam_k = (np.cumsum(w_s * a_s, axis=1) - radius[:, None]) / np.cumsum(w_s * w_s, axis=1)
    active = r_s > lam_k
    # the active set is a prefix of the sorted order; take its last index
    last = d - 1 - np.argmax(active[:, ::-1], axis=1)
    any_active = active.any(axis=1)
    lam = np.where(any_active, lam_k[np.arange(G), last], r_s[:, 0])
    lam = np.maximum(lam, 0.0)
    out = np.sign(V) * np.maximum(a - lam[:, None] * w, 0.0)
    return np.where(inside[:, None], V, out)


def project_group_ball(Z: MatrixPoly, w: WeightSet) -> MatrixPoly:
    """Project ``Z`` onto the product of per-pair weighted l1 balls of the dual."""
    lay = GroupLayout(Z.m, Z.n)
    r_off, r_diag = lay.radii(w.budgets())
    return MatrixPoly(lay.unpack(lay.project(lay.pack(Z.blocks), r_off, r_diag)))


# ---------------------------------------------------------------------------
# objective


def schur_terms(B: np.ndarray, m: int):
    """``(W, a, logdet W, X = a W^{-1} a^T)``; raises when ``B`` is outside the domain."""
    W, a = block_schur(B, m)
    ld = logdet_pd(W)
    Winv = np.linalg.inv(W)
    X = a @ Winv @ a.T
    return W, a, ld, 0.5 * (X + X.T)


def dual_objective_grad(Z: MatrixPoly, Rhat: MatrixPoly):
    """Value ``log|W| + m``, gradient ``D(X)`` and ``X = a W^{-1} a^T`` at ``Z``."""
    m = Rhat.m
    _, _, ld, X = schur_terms(toeplitz(Rhat + Z), m)
    return ld + m, adjoint_D(X, m), X


def recover_sigma(X: np.ndarray, m: int) -> MatrixPoly:
    """Coefficients of ``Delta X Delta^*`` (which is exactly ``D(X)``)."""
    return adjoint_D(X, m)


def primal_value(X: np.ndarray, Rhat: MatrixPoly, w: WeightSet, H: np.ndarray | None = None) -> float:
    """Scaled primal objective ``-log|X_00| + <T(Rhat), X> + 2/(N-n) * penalties``."""
    m = Rhat.m
    val = -logdet_pd(X[:m, :m]) + float(np.vdot(toeplitz(Rhat), X))
    XH = X if H is None else X + H
    val += w.scale * w.penalty(adjoint_D(XH, m))
    if H is not None:
        val += w.scale * float(np.vdot(np.kron(np.eye(Rhat.n + 1), w.Q), H))
    return val


# ---------------------------------------------------------------------------
# projected gradient engine


@dataclass
class PGResult:
    z: np.ndarray
    value: float
    aux: object
    iterations: int
    converged: bool
    pg_norm: float
    values: list = field(default_factory=list)


def projected_gradient(evaluate, project, z0, opts: SolverOptions, certificate=None) -> PGResult:
    """Maximise a concave function over a convex set.

    ``evaluate(z)`` returns ``(value, grad, aux)`` or raises
    :class:`InfeasibleError` outside the domain; ``project(z)`` is the
    Euclidean projection; ``certificate(value, z, grad, aux)`` may return
    True to stop early with ``converged = True``.
    """
    z = z0
    val, g, aux = evaluate(z)
    values = [val]
    t = _initial_step(evaluate, project, z, g)
    z_prev = g_prev = None
    pg = np.inf
    for it in range(1, opts.max_iter + 1):
        pg = float(np.linalg.norm(project(z + g) - z))
        if pg <= opts.tol_pg or (certificate is not None and certificate(val, z, g, aux)):
            return PGResult(z, val, aux, it - 1, True, pg, values)
        if z_prev is not None:
            s, y = z - z_prev, g - g_prev
            sy = -float(s @ y)
            if sy > 0:
                t = float(s @ s) / sy if it % 2 else sy / float(y @ y)
        accepted = False
        # near the optimum the value stops resolving increases; tolerate
        # roundoff-sized decreases so the gradient can still be followed
        slack = 10.0 * np.finfo(float).eps * max(1.0, abs(val))
        for _ in range(60):
            zt = project(z + t * g)
            try:
                vt, gt, auxt = evaluate(zt)
            except InfeasibleError:
                t *= opts.backtrack_factor
                continue
            if vt >= val + opts.sufficient_increase * float(g @ (zt - z)) - slack:
                accepted = True
                break
            t *= opts.backtrack_factor
        if not accepted:
            log.debug("line search failed at iteration %d", it)
            return PGResult(z, val, aux, it, False, pg, values)
        z_prev, g_prev = z, g
        change = abs(vt - val)
        z, val, g, aux = zt, vt, gt, auxt
        values.append(val)
        if opts.verbose:
            log.info("it %d value %.12g step %.3g", it, val, t)
        if change <= opts.tol_rel * max(1.0, abs(val)) and np.linalg.norm(z - z_prev) > 0:
            pg = float(np.linalg.norm(project(z + g) - z))
            done = certificate is None or certificate(val, z, g, aux)
            if done:
                return PGResult(z, val, aux, it, True, pg, values)
    return PGResult(z, val, aux, opts.max_iter, False, pg, values)


def _initial_step(evaluate, project, z, g) -> float:
    """Inverse curvature estimate from two power sweeps of finite-difference Hessian products."""
    gn = float(np.linalg.norm(g))
    if gn == 0:
        return 1.0
    v = g / gn
    lam = None
    for _ in range(2):
        eps = 1e-6 * max(1.0, float(np.linalg.norm(z)))
        try:
            _, g2, _ = evaluate(z + eps * v)
        except InfeasibleError:
            break
        hv = (g2 - g) / eps
        lam = float(np.linalg.norm(hv))
        if lam == 0:
            break
        v = hv / lam
    return 1.0 / lam if lam else 1.0


# ---------------------------------------------------------------------------
# sparse solve


def feasible_start(Zb: np.ndarray, lay: GroupLayout, r_off, r_diag, Rhat: MatrixPoly,
                   extra=None) -> np.ndarray:
    """Project a warm start onto the balls and shrink it toward 0 until it is in the domain."""
    z = lay.project(lay.pack(Zb), r_off, r_diag)
    m = Rhat.m
    for _ in range(40):
        try:
            schur_terms(toeplitz(Rhat + MatrixPoly(lay.unpack(z))), m)
            if extra is None or extra(z):
                return z
        except InfeasibleError:
            pass
        z = 0.5 * z
    return np.zeros_like(z)


def solve_sparse_dual(Rhat: MatrixPoly, w: WeightSet, opts: SolverOptions | None = None,
                      Z0: MatrixPoly | None = None) -> SparseSolution:
    """Solve the weighted sparse problem through its dual and recover ``X``.

    Requires ``T(Rhat) > 0`` (so ``Z = 0`` is feasible). Stops on a small
    projected-gradient step, a small relative duality gap, negligible
    objective change, or ``opts.max_iter``.
    """
    opts = opts or SolverOptions()
    m, n = Rhat.m, Rhat.n
    TR = toeplitz(Rhat)
    if np.linalg.eigvalsh(TR)[0] <= 0:
        raise InfeasibleError("T(Rhat) is not positive definite")
    lay = GroupLayout(m, n)
    budgets = w.budgets()
    r_off, r_diag = lay.radii(budgets)

    def evaluate(z):
        Zb = lay.unpack(z)
        _, _, ld, X = schur_terms(TR + toeplitz(MatrixPoly(Zb)), m)
        G = adjoint_D(X, m)
        return ld + m, lay.coord_grad(G.blocks), (X, G, Zb)

    def project(z):
        return lay.project(z, r_off, r_diag)

    def certificate(val, z, g, aux):
        X, G, Zb = aux
        gap = w.scale * w.penalty(G) - float(np.vdot(Zb, G.blocks))
        return gap <= opts.tol_gap * (1.0 + abs(val))

    z0 = np.zeros(lay.size) if Z0 is None else feasible_start(Z0.blocks, lay, r_off, r_diag, Rhat)
    res = projected_gradient(evaluate, project, z0, opts, certificate)
    X, G, Zb = res.aux
    W = np.linalg.inv(X[:m, :m])
    pv = primal_value(X, Rhat, w)
    return SparseSolution(
        X=X, Z=MatrixPoly(Zb), W=0.5 * (W + W.T), dual_value=res.value, primal_value=pv,
        gap=pv - res.value, iterations=res.iterations, converged=res.converged,
        pg_norm=res.pg_norm)
