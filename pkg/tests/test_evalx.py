import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from argraph.armodel import random_latent_inverse, random_sparse_inverse
from argraph.ebayes import EstimateResult
from argraph.evalx import (complexity_C, evaluate, n_params, numerical_rank, partial_coherence,
                           rel_errors, s_count, support_error, support_from_pc, truth_complexity)
from argraph.polyalg import InfeasibleError, MatrixPoly, adjoint_D

from conftest import rand_poly


class TestRelErrors:
    def test_exact(self, rng):
        S, L = rand_poly(rng, 3, 1), rand_poly(rng, 3, 1)
        assert rel_errors(S, L, S, L) == (0.0, 0.0)

    def test_doubled(self, rng):
        S = rand_poly(rng, 3, 1)
        e, esl = rel_errors(2.0 * S, None, S)
        assert e == pytest.approx(1.0) and esl is None

    def test_brute_force(self, rng):
        Sh, Lh, S, L = (rand_poly(rng, 2, 2) for _ in range(4))
        num = den = num2 = 0.0
        for k in range(3):
            for i in range(2):
                for j in range(2):
                    p = S[k][i, j] - L[k][i, j]
                    num += (Sh[k][i, j] - Lh[k][i, j] - p) ** 2
                    num2 += (Sh[k][i, j] - S[k][i, j]) ** 2 + (Lh[k][i, j] - L[k][i, j]) ** 2
                    den += p ** 2
        e, esl = rel_errors(Sh, Lh, S, L)
        assert e == pytest.approx(num / den) and esl == pytest.approx(num2 / den)

    def test_scale_covariant(self, rng):
        Sh, S = rand_poly(rng, 3, 1), rand_poly(rng, 3, 1)
        assert rel_errors(3.0 * Sh, None, 3.0 * S)[0] == pytest.approx(rel_errors(Sh, None, S)[0])

    def test_degenerate_truth(self):
        with pytest.raises(ValueError):
            rel_errors(MatrixPoly.identity(2, 1), None, MatrixPoly.zeros(2, 1))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            rel_errors(MatrixPoly.identity(2, 1), None, MatrixPoly.identity(2, 2))


class TestPartialCoherence:
    def test_diagonal(self):
        S = MatrixPoly(np.stack([np.diag([2.0, 3, 4]), np.diag([.5, .2, .1])]))
        PC = partial_coherence(S)
        np.testing.assert_array_equal(PC - np.eye(3), 0)

    @pytest.mark.parametrize("rho", [0.3, -0.7])
    def test_constant_closed_form(self, rho):
        PC = partial_coherence(MatrixPoly(np.array([[1.0, rho], [rho, 1.0]])))
        assert PC[1, 0] == pytest.approx(abs(rho))

    def test_diagonal_rescaling_invariance(self, rng):
        G = random_sparse_inverse(4, 1, 0.5, seed=1)
        D = np.diag(rng.uniform(0.5, 2, 4))
        S2 = MatrixPoly(np.stack([D @ B @ D for B in G.S.blocks]))
        np.testing.assert_allclose(partial_coherence(S2), partial_coherence(G.S), atol=1e-12)

    def test_with_lowrank(self):
        G = random_latent_inverse(4, 1, 0.3, 1, seed=2)
        np.testing.assert_allclose(partial_coherence(G.S, G.L),
                                   partial_coherence(G.inverse_spectrum()))

    def test_nonpositive(self):
        with pytest.raises(InfeasibleError):
            partial_coherence(MatrixPoly(np.diag([1.0, -1.0])))

    def test_tiny_threshold_recovers_pattern(self, rng):
        m, n = 5, 1
        a = rng.standard_normal((m * (n + 1), m * (n + 1)))
        X = a @ a.T + np.eye(m * (n + 1))
        S = adjoint_D(X, m).blocks.copy()
        S[:, 3, 1] = S[:, 1, 3] = 0.0
        S[:, 4, 0] = S[:, 0, 4] = 0.0
        P = MatrixPoly(S)
        sup = support_from_pc(partial_coherence(P), 1e-12)
        pattern = {(j, h) for j in range(m) for h in range(j) if np.abs(S[:, j, h]).max() > 0
                   or np.abs(S[:, h, j]).max() > 0}
        assert sup == pattern


class TestSupportError:
    def test_perfect_and_complement(self):
        m = 4
        truth = {(1, 0), (3, 2)}
        PC = np.eye(m)
        for j, h in truth:
            PC[j, h] = PC[h, j] = 0.5
        assert support_error(PC, truth)[0] == 0.0
        comp = {(j, h) for j in range(m) for h in range(j)} - truth
        assert support_error(PC, comp)[0] == 1.0

    def test_hand_count(self):
        PC = np.eye(4)
        PC[2, 0] = PC[0, 2] = 0.9
        # truth {(2,1)} and estimate {(3,1)} in 1-based labels
        e, sup = support_error(PC, {(1, 0)})
        assert e == pytest.approx(2 / 6) and sup == {(2, 0)}

    def test_threshold_domain(self):
        with pytest.raises(ValueError):
            support_error(np.eye(3), set(), 1.0)

    def test_pair_orientation_ignored(self):
        PC = np.eye(3)
        PC[2, 1] = PC[1, 2] = 0.5
        assert support_error(PC, {(1, 2)})[0] == 0.0

    @given(st.integers(0, 2**31))
    def test_symmetric_in_swap(self, seed):
        r = np.random.default_rng(seed)
        m = 5
        pairs = [(j, h) for j in range(m) for h in range(j)]
        A = {p for p in pairs if r.random() < 0.4}
        B = {p for p in pairs if r.random() < 0.4}

        def pc(s):
            P = np.eye(m)
            for j, h in s:
                P[j, h] = P[h, j] = 0.5
            return P

        assert support_error(pc(A), B)[0] == support_error(pc(B), A)[0]


class TestRank:
    def test_zero(self):
        assert numerical_rank(np.zeros((6, 6)), m=3) == 0

    def test_constructed_rank_two(self, rng):
        m, n = 5, 1
        F = rng.standard_normal((m * (n + 1), 2))
        assert numerical_rank(F @ F.T, m=m) == 2
        assert numerical_rank(adjoint_D(F @ F.T, m)) == 2

    @given(st.integers(0, 2**31))
    def test_threshold_one(self, seed):
        r = np.random.default_rng(seed)
        F = r.standard_normal((6, 3))
        assert numerical_rank(F @ F.T, 1.0, m=3) <= 1

    def test_needs_m_for_gram(self):
        with pytest.raises(ValueError):
            numerical_rank(np.eye(4))


class TestComplexity:
    def test_denominator(self):
        assert complexity_C(0, 0, 30, 2) * 2265 == pytest.approx(15.0)

    def test_hand_value(self):
        assert complexity_C(3, 0, 3, 1) == pytest.approx(0.4)
        assert n_params(set(), 0, 3, 1) == pytest.approx(6.0)

    def test_overcomplete_and_monotone(self):
        m, n = 4, 1
        assert complexity_C(m * m, m, m, n) > 1
        vals = [complexity_C(s, 1, m, n) for s in range(m, m * m + 1, 2)]
        assert np.all(np.diff(vals) > 0)
        assert complexity_C(m, 2, m, n) > complexity_C(m, 1, m, n)

    def test_s_count_counts_both_triangles(self):
        assert s_count({(1, 0), (2, 1)}, 3) == 7

    def test_truth(self):
        G = random_latent_inverse(6, 1, 0.2, 2, seed=0)
        s = 2 * len(G.support) + 6
        assert truth_complexity(G) == pytest.approx(complexity_C(s, 2, 6, 1))


class TestEvaluate:
    def test_truth_scores_perfect(self):
        G = random_latent_inverse(5, 1, 0.3, 1, seed=3)
        est = EstimateResult(mode="latent", X=np.zeros((10, 10)), S_hat=G.S, H=G.H, L_hat=G.L)
        rep = evaluate(est, G)
        assert rep.e == 0.0 and rep.e_SL == 0.0
        assert rep.rank_hat == 1
        # thresholding hides only weak true edges
        assert rep.e_SP <= 0.2
        d = json.loads(rep.to_json())
        assert d["rank_hat"] == 1 and 0 <= d["e_SP"] <= 1 and d["C"] >= 0

    def test_sparse_report(self):
        G = random_sparse_inverse(4, 1, 0.5, seed=3)
        est = EstimateResult(mode="sparse", X=np.zeros((8, 8)), S_hat=G.S)
        rep = evaluate(est, G)
        assert rep.rank_hat == 0 and rep.e_SL is None
