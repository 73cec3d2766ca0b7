"""Empirical-Bayes reweighting loops for sparse and latent-variable AR graphical models.

Each outer iteration solves the weighted convex problem, then re-estimates
the hyperparameters in closed form from the new solution:

    gamma_jj = (n + 1) / (q_jj + eps_S),   gamma_jh = (2n + 1) / (q_jh + eps_S),
    Q = (m + 1) / 2 * (L_0 + eps_L I)^{-1}.

This is a majorization-minimization scheme for a log-sum (and log-det)
penalized likelihood, so :func:`mm_objective` is non-increasing along the
iterates up to the inner solver accuracy.
"""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .armodel import ar_to_X, yule_walker
from .latentdual import LatentOptions, LatentSolution, solve_latent_dual
from .polyalg import MatrixPoly, adjoint_D, group_maxnorms, logdet_pd, toeplitz
from .sparsedual import SolverOptions, WeightSet, solve_sparse_dual

log = logging.getLogger(__name__)


def _eb_sparse_opts():
    return SolverOptions(tol_pg=1e-10, tol_gap=1e-12, tol_rel=1e-15, max_iter=20000)


def _eb_latent_opts():
    return LatentOptions(tol_pg=1e-10, tol_gap=1e-12, tol_rel=1e-15, tol_admm=1e-9, max_admm=3000)


@dataclass
class EBConfig:
    eps_S: float = 1e-3
    eps_L: float = 1e-3
    eps_stop: float = 1e-4
    l_max: int = 50
    alpha: float = 0.1
    # "gml": (n+1)/(q+eps), (2n+1)/(q+eps); "plain": 1/(q+eps)
    update: str = "gml"
    relative_step: bool = False
    warm_start: bool = True
    sparse_opts: SolverOptions = field(default_factory=_eb_sparse_opts)
    latent_opts: LatentOptions = field(default_factory=_eb_latent_opts)

    def __post_init__(self):
        if self.eps_S <= 0 or self.eps_L <= 0:
            raise ValueError("eps_S and eps_L must be positive")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.l_max < 1:
            raise ValueError("l_max must be at least 1")
        if self.update not in ("gml", "plain"):
            raise ValueError("update must be 'gml' or 'plain'")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "EBConfig":
        d = dict(d)
        so = d.pop("sparse_opts", None)
        lo = d.pop("latent_opts", None)
        cfg = cls(**d)
        if so:
            cfg.sparse_opts = SolverOptions(**{**asdict(cfg.sparse_opts), **so})
        if lo:
            cfg.latent_opts = LatentOptions(**{**asdict(cfg.latent_opts), **lo})
        return cfg


@dataclass
class EBRecord:
    iteration: int
    gammas: np.ndarray
    Q: np.ndarray | None
    mm_objective: float
    step_change: float
    gap: float
    dual_value: float
    primal_value: float
    inner_iterations: int
    converged: bool

    def to_dict(self) -> dict:
        d = asdict(self)
        d["gammas"] = self.gammas.tolist()
        d["Q"] = None if self.Q is None else self.Q.tolist()
        return d


@dataclass
class EBTrace:
    init_objective: float
    records: list = field(default_factory=list)

    @property
    def objectives(self) -> np.ndarray:
        return np.array([self.init_objective] + [r.mm_objective for r in self.records])

    def to_jsonl(self) -> str:
        lines = [json.dumps({"iteration": -1, "mm_objective": self.init_objective})]
        lines += [json.dumps(r.to_dict()) for r in self.records]
        return "\n".join(lines) + "\n"


@dataclass(eq=False)
class EstimateResult:
    """An estimated inverse spectrum ``Sigma - Lambda`` with ``Sigma = Delta (X+H) Delta^*``."""

    mode: str
    X: np.ndarray
    S_hat: MatrixPoly
    H: np.ndarray | None = None
    L_hat: MatrixPoly | None = None
    iterations: int = 0
    gap: float = float("nan")
    converged: bool = True
    label: str = ""
    extra: dict = field(default_factory=dict)
    # solver state for warm starts; not serialized
    raw: object = field(default=None, repr=False)

    @property
    def m(self) -> int:
        return self.S_hat.m

    @property
    def n(self) -> int:
        return self.S_hat.n

    def inverse_spectrum(self) -> MatrixPoly:
        return self.S_hat if self.L_hat is None else self.S_hat - self.L_hat

    def to_dict(self) -> dict:
        return {
            "mode": self.mode, "label": self.label, "X": self.X.tolist(),
            "H": None if self.H is None else self.H.tolist(),
            "S_hat": self.S_hat.to_dict(),
            "L_hat": None if self.L_hat is None else self.L_hat.to_dict(),
            "iterations": self.iterations, "gap": self.gap, "converged": self.converged,
            "extra": self.extra,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EstimateResult":
        return cls(
            mode=d["mode"], label=d.get("label", ""), X=np.asarray(d["X"], dtype=float),
            H=None if d.get("H") is None else np.asarray(d["H"], dtype=float),
            S_hat=MatrixPoly.from_dict(d["S_hat"]),
            L_hat=None if d.get("L_hat") is None else MatrixPoly.from_dict(d["L_hat"]),
            iterations=int(d.get("iterations", 0)), gap=float(d.get("gap", float("nan"))),
            converged=bool(d.get("converged", True)), extra=d.get("extra", {}))


# ---------------------------------------------------------------------------
# closed-form hyperparameter updates


def _log_coeffs(m: int, n: int, rule: str = "gml") -> np.ndarray:
    c = np.full((m, m), 1.0 if rule == "plain" else 2 * n + 1.0)
    if rule != "plain":
        np.fill_diagonal(c, n + 1.0)
    return c


def update_gamma(S: MatrixPoly, eps_S: float, rule: str = "gml") -> np.ndarray:
    """Symmetric ``m x m`` table of new weights from the group max-norms of ``S``."""
    if eps_S <= 0:
        raise ValueError("eps_S must be positive")
    return _log_coeffs(S.m, S.n, rule) / (group_maxnorms(S) + eps_S)


def update_Q(L0: np.ndarray, eps_L: float) -> np.ndarray:
    """``(m + 1) / 2 * (L0 + eps_L I)^{-1}``."""
    L0 = np.asarray(L0, dtype=float)
    L0 = 0.5 * (L0 + L0.T)
    m = L0.shape[0]
    Q = 0.5 * (m + 1) * np.linalg.inv(L0 + eps_L * np.eye(m))
    return 0.5 * (Q + Q.T)


def mm_objective(X: np.ndarray, H: np.ndarray | None, Rhat: MatrixPoly, cfg: EBConfig,
                 Nn: int) -> float:
    """Penalized likelihood minimized by the reweighting loop, scaled by ``2/(N-n)``.

    ``-log|X_00| + <T(Rhat), X> + 2/(N-n) * [sum_{j>=h} c_jh log(q_jh + eps_S)
    (+ (m+1)/2 log|D_0(H) + eps_L I|)]`` with ``q`` taken on ``D(X + H)``.
    """
    m, n = Rhat.m, Rhat.n
    XH = X if H is None else X + H
    q = group_maxnorms(adjoint_D(XH, m))
    pen = float(np.tril(_log_coeffs(m, n, cfg.update) * np.log(q + cfg.eps_S)).sum())
    if H is not None:
        L0 = adjoint_D(H, m)[0]
        pen += 0.5 * (m + 1) * logdet_pd(L0 + cfg.eps_L * np.eye(m))
    lik = -logdet_pd(X[:m, :m]) + float(np.vdot(toeplitz(Rhat), X))
    return lik + 2.0 / Nn * pen


def burg_init(Rhat: MatrixPoly) -> np.ndarray:
    """Order-n AR fit of the data mapped to ``X_B = a R_e^{-1} a^T``."""
    model, _ = yule_walker(Rhat)
    return ar_to_X(model)


def _step(a, b, cfg):
    d = float(np.linalg.norm(a - b))
    if cfg.relative_step:
        d /= max(float(np.linalg.norm(b)), 1e-300)
    return d


# ---------------------------------------------------------------------------
# outer loops


def run_sparse_eb(Rhat: MatrixPoly, Nn: int, cfg: EBConfig | None = None):
    """Iteratively reweighted estimate of a sparse inverse spectrum.

    Returns ``(EstimateResult, EBTrace)``.
    """
    cfg = cfg or EBConfig()
    m = Rhat.m
    X_prev = burg_init(Rhat)
    gam = update_gamma(adjoint_D(X_prev, m), cfg.eps_S, cfg.update)
    trace = EBTrace(init_objective=mm_objective(X_prev, None, Rhat, cfg, Nn))
    Z = None
    sol = None
    for l in range(cfg.l_max):
        w = WeightSet(gam, Nn)
        try:
            sol = solve_sparse_dual(Rhat, w, cfg.sparse_opts, Z0=Z if cfg.warm_start else None)
        except Exception as exc:
            raise RuntimeError(f"inner sparse solve failed at iteration {l}: {exc}") from exc
        Z = sol.Z
        change = _step(sol.X, X_prev, cfg)
        trace.records.append(EBRecord(
            iteration=l, gammas=gam, Q=None,
            mm_objective=mm_objective(sol.X, None, Rhat, cfg, Nn), step_change=change,
            gap=sol.gap, dual_value=sol.dual_value, primal_value=sol.primal_value,
            inner_iterations=sol.iterations, converged=sol.converged))
        log.debug("sparse EB %d: change %.3g gap %.3g", l, change, sol.gap)
        X_prev = sol.X
        gam = update_gamma(adjoint_D(sol.X, m), cfg.eps_S, cfg.update)
        if change < cfg.eps_stop:
            break
    S_hat = adjoint_D(sol.X, m)
    res = EstimateResult(mode="sparse", X=sol.X, S_hat=S_hat, iterations=len(trace.records),
                         gap=sol.gap, converged=trace.records[-1].step_change < cfg.eps_stop,
                         label="RW", raw=sol)
    return res, trace


def run_latent_eb(Rhat: MatrixPoly, Nn: int, cfg: EBConfig | None = None):
    """Iteratively reweighted estimate of a sparse-minus-low-rank inverse spectrum.

    Returns ``(EstimateResult, EBTrace)``; the estimate carries
    ``S_hat = D(X + H)`` and ``L_hat = D(H)``.
    """
    cfg = cfg or EBConfig()
    m = Rhat.m
    XB = burg_init(Rhat)
    a = cfg.alpha
    gam = update_gamma((1 + a) * adjoint_D(XB, m), cfg.eps_S, cfg.update)
    Q = update_Q(a * adjoint_D(XB, m)[0], cfg.eps_L)
    X_prev, H_prev = XB, a * XB
    trace = EBTrace(init_objective=mm_objective(X_prev, H_prev, Rhat, cfg, Nn))
    warm: LatentSolution | None = None
    sol = None
    for l in range(cfg.l_max):
        w = WeightSet(gam, Nn, Q=Q)
        try:
            sol = solve_latent_dual(Rhat, w, cfg.latent_opts, warm=warm if cfg.warm_start else None)
        except Exception as exc:
            raise RuntimeError(f"inner latent solve failed at iteration {l}: {exc}") from exc
        warm = sol
        change = _step(sol.X, X_prev, cfg) + _step(sol.H, H_prev, cfg)
        trace.records.append(EBRecord(
            iteration=l, gammas=gam, Q=Q,
            mm_objective=mm_objective(sol.X, sol.H, Rhat, cfg, Nn), step_change=change,
            gap=sol.gap, dual_value=sol.dual_value, primal_value=sol.primal_value,
            inner_iterations=sol.admm_iterations, converged=sol.converged))
        log.debug("latent EB %d: change %.3g gap %.3g", l, change, sol.gap)
        X_prev, H_prev = sol.X, sol.H
        gam = update_gamma(adjoint_D(sol.X + sol.H, m), cfg.eps_S, cfg.update)
        Q = update_Q(adjoint_D(sol.H, m)[0], cfg.eps_L)
        if change < cfg.eps_stop:
            break
    res = EstimateResult(
        mode="latent", X=sol.X, H=sol.H, S_hat=adjoint_D(sol.X + sol.H, m),
        L_hat=adjoint_D(sol.H, m), iterations=len(trace.records), gap=sol.gap,
        converged=trace.records[-1].step_change < cfg.eps_stop, label="RW", raw=sol)
    return res, trace
