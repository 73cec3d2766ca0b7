"""Evaluation metrics: relative errors, partial-coherence support error, rank and complexity."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .polyalg import InfeasibleError, MatrixPoly, adjoint_D, eval_poly, uniform_grid

PC_THRESHOLD = 0.1
SV_THRESHOLD = 0.1


def rel_errors(S_hat: MatrixPoly, L_hat: MatrixPoly | None, S_true: MatrixPoly,
               L_true: MatrixPoly | None = None) -> tuple[float, float | None]:
    """Relative errors ``e`` (on ``S - L``) and ``e_SL`` (on the two parts separately).

    ``e_SL`` is None when both low-rank parts are absent.
    """
    if (S_hat.m, S_hat.n) != (S_true.m, S_true.n):
        raise ValueError("estimate and truth have different (m, n)")
    zero = np.zeros_like(S_true.blocks)
    Lh = zero if L_hat is None else L_hat.blocks
    Lt = zero if L_true is None else L_true.blocks
    P_true = S_true.blocks - Lt
    den = float(np.sum(P_true ** 2))
    if den == 0.0:
        raise ValueError("true inverse spectrum is zero")
    e = float(np.sum((S_hat.blocks - Lh - P_true) ** 2)) / den
    if L_hat is None and L_true is None:
        return e, None
    e_sl = (float(np.sum((S_hat.blocks - S_true.blocks) ** 2))
            + float(np.sum((Lh - Lt) ** 2))) / den
    return e, e_sl


def partial_coherence(S_hat: MatrixPoly, L_hat: MatrixPoly | None = None,
                      gridsize: int = 512) -> np.ndarray:
    """Largest absolute partial coherence of each pair over the grid; diagonal is 1."""
    P = S_hat if L_hat is None else S_hat - L_hat
    theta = uniform_grid(gridsize)
    theta = theta[theta >= 0]  # Hermitian symmetry: the other half mirrors
    G = eval_poly(P, theta)
    d = np.real(np.diagonal(G, axis1=1, axis2=2))
    if np.any(d <= 0) or np.linalg.eigvalsh(G)[:, 0].min() <= 0:
        raise InfeasibleError("inverse spectrum is not positive on the grid")
    coh = np.abs(G) / np.sqrt(d[:, :, None] * d[:, None, :])
    PC = coh.max(axis=0)
    np.fill_diagonal(PC, 1.0)
    return PC


def support_from_pc(PC: np.ndarray, threshold: float = PC_THRESHOLD) -> frozenset:
    """Pairs ``(j, h)``, ``j > h`` (0-based), whose coherence exceeds ``threshold``."""
    j, h = np.tril_indices(PC.shape[0], -1)
    keep = PC[j, h] > threshold
    return frozenset(zip(j[keep].tolist(), h[keep].tolist()))


def support_error(PC: np.ndarray, true_support, threshold: float = PC_THRESHOLD):
    """Fraction of misplaced pairs; returns ``(e_SP, support_hat)``."""
    if not 0 < threshold < 1:
        raise ValueError("threshold must lie in (0, 1)")
    m = PC.shape[0]
    est = support_from_pc(PC, threshold)
    truth = frozenset((max(p), min(p)) for p in true_support)
    pairs = m * (m - 1) // 2
    if pairs == 0:
        return 0.0, est
    return len(est ^ truth) / pairs, est


def numerical_rank(L, threshold: float = SV_THRESHOLD, m: int | None = None,
                   gridsize: int = 512) -> int:
    """Number of grid-maximal singular values of ``Lambda`` above ``threshold`` times the largest.

    ``L`` is a MatrixPoly, or a Gram matrix ``H`` (then ``m`` is required and
    ``Lambda = D(H)``).
    """
    if not isinstance(L, MatrixPoly):
        if m is None:
            raise ValueError("m is required when passing H")
        L = adjoint_D(np.asarray(L, dtype=float), m)
    theta = uniform_grid(gridsize)
    theta = theta[theta >= 0]
    sv = np.linalg.svd(eval_poly(L, theta), compute_uv=False)
    top = sv.max(axis=0)
    if top[0] <= 0:
        return 0
    return int(np.count_nonzero(top > threshold * top[0]))


def complexity_C(s_count: int, rank: int, m: int, n: int) -> float:
    """``((s + m)/2 + s n + r m (n+1)) / (m(m+1)/2 + m^2 n)``.

    ``s_count`` counts nonzero entries of the common support in both
    triangles plus the ``m`` diagonal entries.
    """
    num = 0.5 * (s_count + m) + s_count * n + rank * m * (n + 1)
    return num / (0.5 * m * (m + 1) + m * m * n)


def s_count(support, m: int) -> int:
    return 2 * len(support) + m


def n_params(support, rank: int, m: int, n: int) -> float:
    """Free-parameter count ``(s + m)/2 + s n + r m (n+1)``."""
    s = s_count(support, m)
    return 0.5 * (s + m) + s * n + rank * m * (n + 1)


def truth_complexity(G) -> float:
    """Complexity of a generated ground truth from its drawn support and rank."""
    return complexity_C(s_count(G.support, G.m), G.r, G.m, G.n)


@dataclass
class MetricReport:
    e: float
    e_SP: float
    C: float
    support_hat: frozenset
    rank_hat: int
    e_SL: float | None = None
    thresholds: dict = field(default_factory=lambda: {"pc": PC_THRESHOLD, "sv": SV_THRESHOLD})

    def to_dict(self) -> dict:
        return {
            "e": self.e, "e_SL": self.e_SL, "e_SP": self.e_SP, "C": self.C,
            "rank_hat": self.rank_hat, "support_size": len(self.support_hat),
            "support_hat": sorted([list(p) for p in self.support_hat]),
            "pc_threshold": self.thresholds["pc"], "sv_threshold": self.thresholds["sv"],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def evaluate(est, truth, pc_threshold: float = PC_THRESHOLD, sv_threshold: float = SV_THRESHOLD,
             gridsize: int = 512) -> MetricReport:
    """Score an ``EstimateResult`` against a ``GroundTruth``."""
    e, e_sl = rel_errors(est.S_hat, est.L_hat, truth.S, truth.L)
    # the support is that of the sparse component
    PC = partial_coherence(est.S_hat, None, gridsize)
    e_sp, sup = support_error(PC, truth.support, pc_threshold)
    rank = 0 if est.L_hat is None else numerical_rank(est.L_hat, sv_threshold, gridsize=gridsize)
    C = complexity_C(s_count(sup, est.m), rank, est.m, est.n)
    return MetricReport(e=e, e_SL=e_sl, e_SP=e_sp, C=C, support_hat=sup, rank_hat=rank,
                        thresholds={"pc": pc_threshold, "sv": sv_threshold})
