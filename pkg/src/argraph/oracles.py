"""Independent numerical oracles used by the ``selftest`` command.

Each check compares a production routine with a result computed another
way (closed form, finite differences, root finding or 1-D minimization).
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .armodel import ar_to_X, make_rng, yule_walker
from .ebayes import update_gamma, update_Q
from .polyalg import MatrixPoly, adjoint_D, toeplitz
from .sparsedual import (WeightSet, dual_objective_grad, project_weighted_l1,
                         solve_sparse_dual)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


def random_lags(m: int, n: int, rng, N: int = 400) -> MatrixPoly:
    """Sample lags of white-ish data; ``T`` of the result is positive definite."""
    A = 0.3 * rng.standard_normal((m, m))
    y = np.zeros((N + n + 1, m))
    e = rng.standard_normal((N + n + 1, m))
    for t in range(1, N + n + 1):
        y[t] = A @ y[t - 1] * 0.5 + e[t]
    y = y[n + 1:]
    B = np.stack([y[k:].T @ y[:N - k] for k in range(n + 1)]) / (N - n)
    return MatrixPoly(B)


def random_poly(m: int, n: int, rng, scale: float = 1.0) -> MatrixPoly:
    B = scale * rng.standard_normal((n + 1, m, m))
    B[0] = 0.5 * (B[0] + B[0].T)
    return MatrixPoly(B)


def project_l1_by_root(v: np.ndarray, w: np.ndarray, radius: float) -> np.ndarray:
    """Weighted-l1 ball projection via a scalar root find on the soft threshold."""
    if np.sum(w * np.abs(v)) <= radius:
        return v.copy()

    def excess(lam):
        return np.sum(w * np.maximum(np.abs(v) - lam * w, 0.0)) - radius

    lam = brentq(excess, 0.0, float(np.max(np.abs(v) / w)), xtol=1e-15, rtol=1e-15)
    return np.sign(v) * np.maximum(np.abs(v) - lam * w, 0.0)


def check_adjoint(seed=0):
    rng = make_rng(seed)
    worst = 0.0
    for m, n in [(1, 0), (2, 1), (3, 2)]:
        Y = random_poly(m, n, rng)
        X = rng.standard_normal((m * (n + 1),) * 2)
        X = X + X.T
        lhs = float(np.vdot(toeplitz(Y), X))
        rhs = Y.inner(adjoint_D(X, m))
        worst = max(worst, abs(lhs - rhs) / (1 + abs(lhs)))
    return worst <= 1e-10, f"max relative mismatch {worst:.2e}"


def check_scalar_optimum():
    sol = solve_sparse_dual(MatrixPoly(np.ones((1, 1, 1))), WeightSet(np.ones((1, 1)), 100))
    err = abs(sol.X[0, 0] - 1 / 1.02)
    return err <= 1e-6 and sol.gap <= 1e-8, f"|X - 1/1.02| = {err:.2e}, gap {sol.gap:.2e}"


def check_yule_walker_limit(seed=0):
    rng = make_rng(seed)
    worst = 0.0
    for m, n in [(3, 1), (5, 2)]:
        for _ in range(3):
            R = random_lags(m, n, rng)
            sol = solve_sparse_dual(R, WeightSet(np.full((m, m), 1e-12), 400))
            Xb = ar_to_X(yule_walker(R)[0])
            worst = max(worst, np.linalg.norm(sol.X - Xb) / np.linalg.norm(Xb))
    return worst <= 1e-6, f"max relative error {worst:.2e}"


def check_gradient(seed=0):
    rng = make_rng(seed)
    worst = 0.0
    for m, n in [(2, 1), (3, 2)]:
        R = random_lags(m, n, rng)
        Z = random_poly(m, n, rng, 0.05)
        _, G, _ = dual_objective_grad(Z, R)
        V = random_poly(m, n, rng)
        h = 1e-5
        fp = dual_objective_grad(Z + V * h, R)[0]
        fm = dual_objective_grad(Z - V * h, R)[0]
        fd = (fp - fm) / (2 * h)
        an = G.inner(V)
        worst = max(worst, abs(fd - an) / max(abs(an), 1e-12))
    return worst <= 1e-5, f"max relative error {worst:.2e}"


def check_projection(seed=0, count=50):
    rng = make_rng(seed)
    worst = 0.0
    for _ in range(count):
        d = int(rng.integers(1, 6))
        v = rng.standard_normal(d) * 3
        w = rng.uniform(0.2, 3.0, d)
        radius = float(rng.uniform(0.05, 2.0))
        p = project_weighted_l1(v[None], w, radius)[0]
        worst = max(worst, float(np.abs(p - project_l1_by_root(v, w, radius)).max()))
    return worst <= 1e-8, f"max deviation {worst:.2e}"


def check_weight_updates(seed=0, count=20):
    rng = make_rng(seed)
    worst = 0.0
    for _ in range(count):
        n = int(rng.integers(0, 3))
        S = random_poly(3, n, rng)
        eps = 1e-3
        gam = update_gamma(S, eps)
        q = np.abs(S.blocks).max(axis=0)
        q = np.maximum(q, q.T)
        for j, h in [(0, 0), (1, 0)]:
            k = n + 1 if j == h else 2 * n + 1
            qq = q[j, h] + eps
            r = minimize_scalar(lambda g: g * qq - k * np.log(g), bounds=(1e-9, 1e9),
                                method="bounded", options={"xatol": 1e-12})
            worst = max(worst, abs(r.x - gam[j, h]) / gam[j, h])
        L0 = np.diag(rng.uniform(0, 2, 3))
        Q = update_Q(L0, eps)
        for i in range(3):
            a = L0[i, i] + eps
            r = minimize_scalar(lambda x: x * a - 2.0 * np.log(x), bounds=(1e-9, 1e9),
                                method="bounded", options={"xatol": 1e-12})
            worst = max(worst, abs(r.x - Q[i, i]) / Q[i, i])
    return worst <= 1e-6, f"max relative error {worst:.2e}"


CHECKS = {
    "adjoint identity": check_adjoint,
    "scalar optimum": check_scalar_optimum,
    "unregularized limit": check_yule_walker_limit,
    "dual gradient": check_gradient,
    "l1 projection": check_projection,
    "weight updates": check_weight_updates,
}


def run_all() -> list:
    out = []
    for name, fn in CHECKS.items():
        t0 = time.perf_counter()
        try:
            ok, detail = fn()
        except Exception as exc:
            ok, detail = False, f"raised {exc!r}"
        out.append(CheckResult(name, bool(ok), detail, time.perf_counter() - t0))
    return out
