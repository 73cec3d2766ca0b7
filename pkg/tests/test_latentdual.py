import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from argraph.armodel import random_latent_inverse, simulate
from argraph.latentdual import LatentOptions, psd_project, recover_lowrank, solve_latent_dual
from argraph.polyalg import MatrixPoly, adjoint_D, toeplitz
from argraph.sparsedual import GroupLayout, WeightSet, solve_sparse_dual
from argraph.tsdata import covariance_lags

from conftest import rand_lags, rand_sym


@pytest.fixture(scope="module")
def latent_lags():
    G = random_latent_inverse(5, 1, 0.2, 1, seed=1)
    return covariance_lags(simulate(G.ar, 2000, seed=2), 1), 1999


class TestPsdProject:
    def test_psd_fixed_point(self, rng):
        A = rng.standard_normal((5, 5))
        K = A @ A.T
        np.testing.assert_allclose(psd_project(K), K, atol=1e-12)

    def test_clip(self):
        np.testing.assert_allclose(psd_project(np.diag([1.0, -1.0])), np.diag([1.0, 0.0]))

    @given(st.integers(0, 2**31))
    def test_optimality(self, seed):
        r = np.random.default_rng(seed)
        K = rand_sym(r, 4)
        out = psd_project(K)
        assert np.linalg.eigvalsh(out).min() >= -1e-12
        d = np.linalg.norm(K - out)
        for _ in range(100):
            B = r.standard_normal((4, 4))
            assert d <= np.linalg.norm(K - B @ B.T) + 1e-12

    def test_matches_clipping_enumeration(self, rng):
        K = rand_sym(rng, 4)
        vals, vecs = np.linalg.eigh(K)
        # among all ways of zeroing eigenvalues, the nearest PSD one zeroes exactly the negatives
        best = min(
            ((vecs * np.where(mask, 0.0, vals)) @ vecs.T
             for mask in np.ndindex(*(2,) * 4)
             if np.all(np.where(mask, 0.0, vals) >= 0)),
            key=lambda P: np.linalg.norm(K - P))
        np.testing.assert_allclose(psd_project(K), best, atol=1e-12)


class TestRecoverLowrank:
    def test_pd_V_gives_zero(self, rng):
        m, n = 3, 1
        w = WeightSet.uniform(m, 10.0, 100, Q=np.eye(m))
        H = recover_lowrank(MatrixPoly.zeros(m, n), w.Q, np.eye(m * (n + 1)), w)
        np.testing.assert_array_equal(H, 0)

    def test_synthetic_null_space(self, rng):
        m = 4
        Nn = 100
        w = WeightSet.uniform(m, 1e3, Nn, Q=np.eye(m))
        Pb = np.linalg.qr(rng.standard_normal((m, 2)))[0]
        B = rng.standard_normal((m, m))
        Perp = np.eye(m) - Pb @ Pb.T
        # PSD with null space exactly span(Pb)
        V = Perp @ B @ B.T @ Perp
        Z = MatrixPoly(V - w.scale * np.eye(m))
        Ms = np.array([[2.0, 0.3], [0.3, 1.0]])
        Hs = Pb @ Ms @ Pb.T
        X = np.diag(rng.uniform(3, 4, m)) - (Hs - np.diag(np.diag(Hs)))
        H = recover_lowrank(Z, w.Q, X, w)
        np.testing.assert_allclose(Pb.T @ H @ Pb, Ms, atol=1e-6)
        np.testing.assert_allclose(H, Hs, atol=1e-6)

    def test_rank_bounded_by_null_space(self, latent_lags):
        R, Nn = latent_lags
        w = WeightSet(np.full((5, 5), 10.0), Nn, Q=2.0 * np.eye(5))
        sol = solve_latent_dual(R, w, LatentOptions(tol_admm=1e-8))
        ev = np.linalg.eigvalsh(w.scale * np.kron(np.eye(2), w.Q) + toeplitz(sol.Z))
        null = int(np.sum(ev <= 1e-6 * np.abs(ev).max()))
        H = recover_lowrank(sol.Z, w.Q, sol.X, w)
        assert int(np.sum(np.linalg.eigvalsh(H) > 1e-9)) <= null


class TestSolveLatent:
    def test_requires_Q(self, rng):
        with pytest.raises(ValueError):
            solve_latent_dual(rand_lags(rng, 2, 1), WeightSet.uniform(2, 1.0, 100))

    def test_scalar_collapse(self):
        R = MatrixPoly(np.ones((1, 1, 1)))
        w = WeightSet(np.ones((1, 1)), 100, Q=1e6 * np.eye(1))
        sol = solve_latent_dual(R, w)
        assert sol.H[0, 0] == pytest.approx(0.0, abs=1e-12)
        assert sol.X[0, 0] == pytest.approx(1 / 1.02, abs=1e-8)

    def test_huge_Q_matches_sparse(self, rng):
        m, n = 4, 1
        R = rand_lags(rng, m, n)
        g = rng.uniform(1, 5, (m, m))
        sp = solve_sparse_dual(R, WeightSet(g, 398))
        la = solve_latent_dual(R, WeightSet(g, 398, Q=1e6 * np.eye(m)))
        np.testing.assert_allclose(la.H, 0, atol=1e-10)
        assert np.abs(la.X - sp.X).max() <= 1e-5

    @pytest.mark.parametrize("gl", [2.0, 5.0])
    def test_certificates(self, latent_lags, gl):
        R, Nn = latent_lags
        m = R.m
        w = WeightSet(np.full((m, m), 10.0), Nn, Q=gl * np.eye(m))
        sol = solve_latent_dual(R, w, LatentOptions(tol_admm=1e-8))
        assert sol.converged
        assert np.linalg.norm(sol.H) > 0.1
        assert np.linalg.eigvalsh(sol.H).min() >= -1e-8
        assert np.linalg.eigvalsh(sol.X[:m, :m]).min() > 0
        assert np.linalg.norm(sol.K @ sol.H) <= 1e-5 * (1 + np.linalg.norm(sol.H))
        assert abs(sol.gap) <= 1e-4 * (1 + abs(sol.dual_value))
        # dual feasibility: group balls and the semidefinite constraint
        lay = GroupLayout(m, R.n)
        off, diag = lay.group_sums(lay.pack(sol.Z.blocks))
        assert np.all(off <= w.budgets()[lay.jl, lay.hl] + 1e-9)
        assert np.all(diag <= np.diag(w.budgets()) + 1e-9)
        assert np.linalg.eigvalsh(sol.K).min() >= -1e-9

    def test_dual_below_sparse_dual(self, latent_lags):
        R, Nn = latent_lags
        for gl in (1.0, 3.0, 30.0):
            w = WeightSet(np.full((5, 5), 10.0), Nn, Q=gl * np.eye(5))
            la = solve_latent_dual(R, w, LatentOptions(tol_admm=1e-8))
            sp = solve_sparse_dual(R, WeightSet(np.full((5, 5), 10.0), Nn))
            assert la.dual_value <= sp.dual_value + 1e-9

    def test_residual_trend(self, latent_lags):
        R, Nn = latent_lags
        w = WeightSet(np.full((5, 5), 10.0), Nn, Q=2.0 * np.eye(5))
        sol = solve_latent_dual(R, w, LatentOptions(tol_admm=1e-14, max_admm=100))
        hist = [max(h) for h in sol.history]
        assert len(hist) == 100
        assert hist[99] < hist[9]

    def test_warm_start_same_answer(self, latent_lags):
        R, Nn = latent_lags
        g = np.full((5, 5), 10.0)
        a = solve_latent_dual(R, WeightSet(g, Nn, Q=5.0 * np.eye(5)), LatentOptions(tol_admm=1e-8))
        w = WeightSet(g, Nn, Q=2.0 * np.eye(5))
        cold = solve_latent_dual(R, w, LatentOptions(tol_admm=1e-8))
        warm = solve_latent_dual(R, w, LatentOptions(tol_admm=1e-8), warm=a)
        np.testing.assert_allclose(warm.X, cold.X, atol=1e-5)
        assert warm.primal_value == pytest.approx(cold.primal_value, abs=1e-6)

    def test_lambda_matches_H(self, latent_lags):
        R, Nn = latent_lags
        w = WeightSet(np.full((5, 5), 10.0), Nn, Q=2.0 * np.eye(5))
        sol = solve_latent_dual(R, w, LatentOptions(tol_admm=1e-8))
        L = adjoint_D(sol.H, 5)
        assert L.norm() > 0
        assert set(sol.to_dict()) >= {"X", "H", "Z", "gap", "residuals", "converged"}
