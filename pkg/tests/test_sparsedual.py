import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from argraph.armodel import ar_to_X, yule_walker
from argraph.polyalg import InfeasibleError, MatrixPoly, eval_poly, toeplitz
from argraph.sparsedual import (GroupLayout, SolverOptions, WeightSet, dual_objective_grad,
                                primal_value, project_group_ball, project_weighted_l1,
                                projected_gradient, recover_sigma, solve_sparse_dual)

from conftest import rand_lags, rand_poly


def P(*vals):
    return MatrixPoly(np.array(vals, dtype=float).reshape(len(vals), 1, 1))


def brute_l1_projection(v, w, radius):
    """Nearest point of {sum w|x| <= radius} by enumerating active sets."""
    if np.sum(w * np.abs(v)) <= radius:
        return v.copy()
    best, best_d = None, np.inf
    d = len(v)
    s = np.sign(v)
    s[s == 0] = 1
    for mask in itertools.product([0, 1], repeat=d):
        idx = np.array(mask, dtype=bool)
        if not idx.any():
            continue
        # on the face sum_{idx} w s x = radius with x = v - lam w s on idx, zero elsewhere
        lam = (np.sum(w[idx] * np.abs(v[idx])) - radius) / np.sum(w[idx] ** 2)
        x = np.zeros(d)
        x[idx] = v[idx] - lam * w[idx] * s[idx]
        if np.any(np.sign(x[idx]) * s[idx] < -1e-14):
            continue
        dist = np.linalg.norm(x - v)
        if dist < best_d:
            best, best_d = x, dist
    return best


class TestWeightSet:
    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            WeightSet(np.zeros((2, 2)), 10)
        with pytest.raises(ValueError):
            WeightSet(np.ones((2, 2)), 10, Q=-np.eye(2))
        with pytest.raises(ValueError):
            WeightSet(np.ones((2, 2)), 0)

    def test_lower_triangle_is_authoritative(self):
        g = np.array([[1.0, 9.0], [2.0, 3.0]])
        np.testing.assert_array_equal(WeightSet(g, 10).gammas, [[1, 2], [2, 3]])

    def test_budgets(self):
        w = WeightSet.uniform(3, 5.0, 100)
        np.testing.assert_allclose(w.budgets(), 0.1)


class TestDualObjective:
    def test_identity_lags(self):
        val, G, X = dual_objective_grad(P(0, 0), P(1, 0))
        assert val == pytest.approx(1.0)
        np.testing.assert_allclose(X, [[1, 0], [0, 0]])
        np.testing.assert_allclose(G.blocks.ravel(), [1, 0])

    @pytest.mark.parametrize("z", [0.0, 0.5, -0.3])
    def test_scalar_calculus(self, z):
        val, G, _ = dual_objective_grad(P(z), P(1.0))
        assert val == pytest.approx(np.log1p(z) + 1)
        assert G[0][0, 0] == pytest.approx(1 / (1 + z))

    def test_infeasible_raises(self):
        with pytest.raises(InfeasibleError):
            dual_objective_grad(P(-2.0), P(1.0))

    @pytest.mark.parametrize("m,n", [(2, 1), (3, 2)])
    def test_gradient_finite_differences(self, rng, m, n):
        R = rand_lags(rng, m, n)
        for _ in range(20):
            Z = rand_poly(rng, m, n, 0.03)
            V = rand_poly(rng, m, n)
            h = 1e-6
            fd = (dual_objective_grad(Z + V * h, R)[0] - dual_objective_grad(Z - V * h, R)[0]) / (2 * h)
            an = dual_objective_grad(Z, R)[1].inner(V)
            assert abs(fd - an) <= 1e-5 * max(abs(an), 1e-3)


class TestProjection:
    def test_feasible_unchanged_bitwise(self, rng):
        Z = rand_poly(rng, 3, 2, 1e-4)
        w = WeightSet.uniform(3, 10.0, 100)
        np.testing.assert_array_equal(project_group_ball(Z, w).blocks, Z.blocks)

    def test_scalar_clamp(self):
        w = WeightSet(np.ones((1, 1)), 1)
        assert project_group_ball(P(5.0), w)[0][0, 0] == pytest.approx(2.0)
        assert project_group_ball(P(-5.0), w)[0][0, 0] == pytest.approx(-2.0)

    def test_diagonal_group(self):
        w = WeightSet(np.ones((1, 1)), 1)
        np.testing.assert_allclose(project_group_ball(P(3.0, 1.0), w).blocks.ravel(), [2, 0])

    def test_symmetry_and_budgets(self, rng):
        m, n = 4, 2
        w = WeightSet(rng.uniform(0.5, 2, (m, m)), 50)
        Z = project_group_ball(rand_poly(rng, m, n), w)
        np.testing.assert_array_equal(Z[0], Z[0].T)
        lay = GroupLayout(m, n)
        off, diag = lay.group_sums(lay.pack(Z.blocks))
        b = w.budgets()
        assert np.all(off <= b[lay.jl, lay.hl] + 1e-12)
        assert np.all(diag <= np.diag(b) + 1e-12)

    @given(st.integers(1, 5), st.integers(0, 2**31))
    def test_matches_active_set_oracle(self, d, seed):
        r = np.random.default_rng(seed)
        v = r.standard_normal(d) * 3
        w = r.uniform(0.2, 3.0, d)
        radius = float(r.uniform(0.05, 2.0))
        got = project_weighted_l1(v[None], w, radius)[0]
        np.testing.assert_allclose(got, brute_l1_projection(v, w, radius), atol=1e-8)


class TestRecoverSigma:
    def test_identity(self):
        S = recover_sigma(np.eye(2), 1)
        np.testing.assert_allclose(S.blocks.ravel(), [2, 0])
        assert eval_poly(S, 0.4)[0, 0].real == pytest.approx(2.0)

    def test_zero(self):
        np.testing.assert_array_equal(recover_sigma(np.zeros((4, 4)), 2).blocks, 0)

    def test_rank_one(self, rng):
        m, n = 2, 2
        a = rng.standard_normal((m * (n + 1), 1))
        S = recover_sigma(a @ a.T, m)
        for th in rng.uniform(-np.pi, np.pi, 6):
            d = np.hstack([np.exp(1j * k * th) * np.eye(m) for k in range(n + 1)])
            np.testing.assert_allclose(eval_poly(S, th), d @ a @ a.T @ d.conj().T, atol=1e-10)


class TestSolve:
    def test_scalar_kkt(self):
        sol = solve_sparse_dual(P(1.0), WeightSet(np.ones((1, 1)), 100))
        assert sol.Z[0][0, 0] == pytest.approx(0.02, abs=1e-8)
        assert sol.W[0, 0] == pytest.approx(1.02, abs=1e-8)
        assert sol.X[0, 0] == pytest.approx(1 / 1.02, abs=1e-8)
        assert abs(sol.gap) <= 1e-8 and sol.converged

    @pytest.mark.parametrize("m,n", [(3, 1), (4, 2)])
    def test_unregularized_limit(self, rng, m, n):
        R = rand_lags(rng, m, n)
        sol = solve_sparse_dual(R, WeightSet(np.full((m, m), 1e-12), 400))
        Xb = ar_to_X(yule_walker(R)[0])
        assert np.linalg.norm(sol.X - Xb) <= 1e-6 * np.linalg.norm(Xb)

    def test_not_pd_precondition(self):
        with pytest.raises(InfeasibleError):
            solve_sparse_dual(P(1.0, 1.0), WeightSet(np.ones((1, 1)), 10))

    @pytest.mark.parametrize("seed", range(4))
    def test_certificates(self, seed):
        rng = np.random.default_rng(seed)
        m, n = 4, 2
        R = rand_lags(rng, m, n, N=300)
        w = WeightSet(rng.uniform(0.5, 5.0, (m, m)), 298)
        sol = solve_sparse_dual(R, w)
        assert sol.converged
        assert -1e-7 <= sol.gap <= 1e-6 * (1 + abs(sol.dual_value))
        assert np.linalg.eigvalsh(sol.X).min() >= -1e-9
        assert np.linalg.eigvalsh(sol.X[:m, :m]).min() > 0
        assert sol.primal_value == pytest.approx(primal_value(sol.X, R, w))
        lay = GroupLayout(m, n)
        off, diag = lay.group_sums(lay.pack(sol.Z.blocks))
        assert np.all(off <= w.budgets()[lay.jl, lay.hl] + 1e-12)

    def test_ascent_is_monotone(self, rng):
        m, n = 3, 1
        R = rand_lags(rng, m, n)
        w = WeightSet.uniform(m, 3.0, 398)
        lay = GroupLayout(m, n)
        r_off, r_diag = lay.radii(w.budgets())
        vals = []

        def evaluate(z):
            v, G, X = dual_objective_grad(MatrixPoly(lay.unpack(z)), R)
            vals.append(v)
            return v, lay.coord_grad(G.blocks), X

        res = projected_gradient(evaluate, lambda z: lay.project(z, r_off, r_diag),
                                 np.zeros(lay.size), SolverOptions())
        assert res.converged
        assert np.all(np.diff(res.values) >= -1e-12 * np.maximum(1, np.abs(res.values[1:])))

    def test_warm_start_same_answer(self, rng):
        m, n = 3, 1
        R = rand_lags(rng, m, n)
        w1 = WeightSet.uniform(m, 4.0, 398)
        w2 = WeightSet.uniform(m, 2.0, 398)
        s1 = solve_sparse_dual(R, w1)
        cold = solve_sparse_dual(R, w2)
        warm = solve_sparse_dual(R, w2, Z0=s1.Z)
        np.testing.assert_allclose(warm.X, cold.X, atol=1e-6)

    def test_serialization(self):
        d = solve_sparse_dual(P(1.0), WeightSet(np.ones((1, 1)), 100)).to_dict()
        assert {"X", "Z", "W", "dual_value", "primal_value", "gap", "iterations"} <= set(d)


def cvx_primal(R, w):
    """Primal minimum from a generic conic solver."""
    cp = pytest.importorskip("cvxpy")
    m, n = R.m, R.n
    d = m * (n + 1)
    X = cp.Variable((d, d), symmetric=True)
    TR = toeplitz(R)
    blk = lambda a, b: X[a * m:(a + 1) * m, b * m:(b + 1) * m]  # noqa: E731
    D = [sum(blk(h, h) for h in range(n + 1))]
    D += [2 * sum(blk(h, h + k) for h in range(n + 1 - k)) for k in range(1, n + 1)]
    pen = 0
    for j in range(m):
        for h in range(j + 1):
            terms = [D[k][j, h] for k in range(n + 1)] + [D[k][h, j] for k in range(1, n + 1)]
            pen = pen + w.gammas[j, h] * cp.max(cp.abs(cp.hstack(terms)))
    obj = -cp.log_det(X[:m, :m]) + cp.trace(TR @ X) + w.scale * pen
    prob = cp.Problem(cp.Minimize(obj), [X >> 0])
    prob.solve(solver="CLARABEL", tol_gap_abs=1e-10, tol_gap_rel=1e-10, tol_feas=1e-10)
    return prob.value


@pytest.mark.parametrize("seed", range(3))
def test_matches_conic_primal_oracle(seed):
    rng = np.random.default_rng(100 + seed)
    m, n = 2, 1
    R = rand_lags(rng, m, n, N=101)
    w = WeightSet(rng.uniform(0.5, 20.0, (m, m)), 100)
    sol = solve_sparse_dual(R, w)
    ref = cvx_primal(R, w)
    assert abs(sol.primal_value - ref) <= 1e-5
    assert abs(sol.dual_value - ref) <= 1e-5
