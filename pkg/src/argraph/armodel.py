"""Ground-truth model generation, exact lags, Yule-Walker fitting and AR simulation."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .polyalg import (InfeasibleError, MatrixPoly, adjoint_D, block_schur,
                      eval_poly, grid_min_eig, toeplitz, uniform_grid)
from .tsdata import TimeSeries

GEN_GRID = 4096
OFFDIAG_SCALE = 0.3
LOADING_GROWTH = 1.5


def make_rng(*key: int) -> np.random.Generator:
    """Independent generator for a tuple of nonnegative integers (e.g. master seed, trial)."""
    return np.random.default_rng(np.random.SeedSequence([int(k) for k in key]))


@dataclass(frozen=True, eq=False)
class ARModel:
    """``y(t) = -sum_k A_k y(t-k) + e(t)`` with ``e ~ N(0, R)``."""

    A: np.ndarray  # (n, m, m)
    R: np.ndarray

    @property
    def m(self) -> int:
        return self.R.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def companion(self) -> np.ndarray:
        m, n = self.m, self.n
        if n == 0:
            return np.zeros((m, m))
        C = np.zeros((m * n, m * n))
        C[:m] = -np.hstack(list(self.A))
        C[m:, :-m] = np.eye(m * (n - 1))
        return C

    def spectral_radius(self) -> float:
        if self.n == 0:
            return 0.0
        return float(np.abs(np.linalg.eigvals(self.companion())).max())

    def is_stable(self) -> bool:
        return self.spectral_radius() < 1.0


@dataclass(frozen=True, eq=False)
class GroundTruth:
    S: MatrixPoly
    L: MatrixPoly | None = None
    H: np.ndarray | None = None
    support: frozenset = frozenset()
    r: int = 0
    ar: ARModel | None = field(default=None, repr=False)

    @property
    def m(self) -> int:
        return self.S.m

    @property
    def n(self) -> int:
        return self.S.n

    def inverse_spectrum(self) -> MatrixPoly:
        """Coefficients of ``Sigma - Lambda``."""
        return self.S if self.L is None else self.S - self.L

    def to_dict(self) -> dict:
        return {
            "S": self.S.to_dict(),
            "L": None if self.L is None else self.L.to_dict(),
            "H": None if self.H is None else self.H.tolist(),
            "support": sorted([list(p) for p in self.support]),
            "r": self.r,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GroundTruth":
        S = MatrixPoly.from_dict(d["S"])
        L = None if d.get("L") is None else MatrixPoly.from_dict(d["L"])
        H = None if d.get("H") is None else np.asarray(d["H"], dtype=float)
        g = cls(S=S, L=L, H=H, support=frozenset(tuple(p) for p in d["support"]), r=int(d["r"]))
        return attach_ar(g)


def _draw_sparse(m, n, density, rng):
    pairs = [(j, h) for j in range(m) for h in range(j)]
    count = math.ceil(density * len(pairs) - 1e-12)
    chosen = rng.choice(len(pairs), size=count, replace=False) if count else []
    support = frozenset(pairs[i] for i in chosen)
    B = np.zeros((n + 1, m, m))
    B[0] = np.eye(m)
    for k in range(1, n + 1):
        B[k][np.diag_indices(m)] = rng.uniform(-1, 1, m) * OFFDIAG_SCALE
    for j, h in sorted(support):
        B[0, j, h] = B[0, h, j] = rng.uniform(-1, 1) * OFFDIAG_SCALE
        for k in range(1, n + 1):
            B[k, j, h], B[k, h, j] = rng.uniform(-1, 1, 2) * OFFDIAG_SCALE
    return B, support


def _load_diagonal(B, margin, gridsize):
    S = MatrixPoly(B)
    low = grid_min_eig(S, gridsize)
    if low >= margin:
        return S
    # loading by delta*I shifts every eigenvalue by delta, so the schedule needs one eig pass
    delta = 0.1 * float(np.abs(np.diag(B[0])).mean())
    while low + delta < margin:
        delta *= LOADING_GROWTH
    B2 = B.copy()
    B2[0] = B[0] + delta * np.eye(B.shape[1])
    return MatrixPoly(B2)


def random_sparse_inverse(m: int, n: int, density: float, margin: float = 0.1,
                          seed: int = 0, gridsize: int = GEN_GRID,
                          rng: np.random.Generator | None = None) -> GroundTruth:
    """Random ``Sigma`` with a common sparse support, loaded to be positive on the circle."""
    if not 0.0 <= density <= 1.0:
        raise ValueError("density must be in [0, 1]")
    if margin <= 0:
        raise ValueError("margin must be positive")
    rng = make_rng(seed) if rng is None else rng
    B, support = _draw_sparse(m, n, density, rng)
    S = _load_diagonal(B, margin, gridsize)
    return attach_ar(GroundTruth(S=S, support=support))


def _max_latent_scale(S: MatrixPoly, F: np.ndarray, margin: float, gridsize: int) -> float:
    """Largest ``beta`` with ``S(theta) - beta (Delta F)(Delta F)^* >= margin I`` on the grid.

    With ``A = S(theta) - margin I`` positive definite and ``V = Delta F`` of
    rank ``r``, the bound at each angle is ``1 / lambda_max(V^* A^{-1} V)``.
    """
    m, r = S.m, F.shape[1]
    th = uniform_grid(gridsize)
    th = th[th >= 0]
    if gridsize % 2 == 0:
        th = np.append(th, np.pi)
    A = eval_poly(S, th) - margin * np.eye(m)
    Fk = F.reshape(S.n + 1, m, r)
    V = np.einsum("gk,kar->gar", np.exp(1j * np.outer(th, np.arange(S.n + 1))), Fk)
    try:
        C = np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        raise InfeasibleError("Sigma is not above the margin on the grid") from None
    W = np.linalg.solve(C, V)
    top = np.linalg.eigvalsh(np.conj(W.transpose(0, 2, 1)) @ W)[:, -1].max()
    return float(np.inf if top <= 0 else 1.0 / top)


def random_latent_inverse(m: int, n: int, density: float, r: int, margin: float = 0.1,
                          seed: int = 0, beta_max: float = 1.0, headroom: float = 0.5,
                          gridsize: int = GEN_GRID,
                          rng: np.random.Generator | None = None) -> GroundTruth:
    """Sparse ``Sigma`` plus a rank-``r`` ``Lambda = Delta H Delta^*`` with ``Sigma - Lambda > 0``.

    ``H = beta F F^T``; ``beta`` is the largest value in ``(0, beta_max]``
    keeping ``min eig(Sigma - Lambda) >= margin`` on the grid (closed form,
    since ``Lambda`` has rank ``r`` at every angle).
    ``Sigma`` is first loaded to ``margin + headroom`` so the latent part is
    not squeezed to nothing.
    """
    if not 1 <= r < m:
        raise ValueError("need 1 <= r < m")
    rng = make_rng(seed) if rng is None else rng
    B, support = _draw_sparse(m, n, density, rng)
    S = _load_diagonal(B, margin + headroom, gridsize)
    F = rng.standard_normal((m * (n + 1), r))
    G = F @ F.T
    beta = min(beta_max, _max_latent_scale(S, F, margin, gridsize))
    H = beta * G
    return attach_ar(GroundTruth(S=S, L=adjoint_D(H, m), H=H, support=support, r=r))


def exact_lags(G: GroundTruth | MatrixPoly, count: int, gridsize: int = GEN_GRID) -> np.ndarray:
    """Lags ``R_0..R_count`` of the spectrum ``(Sigma - Lambda)^{-1}``.

    Trapezoid rule on a uniform grid (an inverse FFT); returns ``(count+1, m, m)``.
    """
    P = G.inverse_spectrum() if isinstance(G, GroundTruth) else G
    if count + 1 > gridsize // 2:
        raise ValueError("gridsize too small for requested lag count")
    half = gridsize // 2 + 1
    th = 2.0 * np.pi * np.arange(half) / gridsize
    vals = eval_poly(P, th)
    try:
        np.linalg.cholesky(vals)
    except np.linalg.LinAlgError:
        raise InfeasibleError("inverse spectrum is not positive on the grid") from None
    Phi = np.empty((gridsize,) + vals.shape[1:], dtype=complex)
    Phi[:half] = np.linalg.inv(vals)
    # Phi(-theta) is the conjugate of Phi(theta)
    Phi[half:] = np.conj(Phi[1:gridsize - half + 1][::-1])
    # R_k = (1/2pi) int e^{ik theta} Phi d theta = ifft over the grid
    R = np.fft.ifft(Phi, axis=0)[:count + 1].real
    R[0] = 0.5 * (R[0] + R[0].T)
    return R


def yule_walker(R) -> tuple[ARModel, np.ndarray]:
    """Order-n AR fit from lags ``R_0..R_n``; returns ``(model, a)``.

    ``a = [I; A_1^T; ...; A_n^T]`` is the predictor stack of the block Schur
    complement of ``T(R)``; the innovation covariance is that complement.
    """
    Rp = R if isinstance(R, MatrixPoly) else MatrixPoly(np.asarray(R, dtype=float))
    m, n = Rp.m, Rp.n
    W, a = block_schur(toeplitz(Rp), m)
    if np.linalg.eigvalsh(W)[0] <= 0:
        raise InfeasibleError("Toeplitz matrix is singular")
    A = np.stack([a[(k + 1) * m:(k + 2) * m].T for k in range(n)]) if n else np.zeros((0, m, m))
    return ARModel(A=A, R=W), a


def ar_to_X(model: ARModel) -> np.ndarray:
    """``X = a R^{-1} a^T`` so that ``Delta X Delta^*`` is the inverse spectrum of the model."""
    m = model.m
    a = np.vstack([np.eye(m)] + [Ak.T for Ak in model.A])
    X = a @ np.linalg.solve(model.R, a.T)
    return 0.5 * (X + X.T)


def attach_ar(G: GroundTruth) -> GroundTruth:
    R = exact_lags(G, G.n)
    model, _ = yule_walker(R)
    object.__setattr__(G, "ar", model)
    return G


def default_burnin(model: ARModel) -> int:
    rho = model.spectral_radius()
    if rho >= 1:
        return 5000
    return int(min(5000, 10 * max(model.n, 1) * math.ceil(1.0 / (1.0 - rho))))


def simulate(model: ARModel, N: int, seed: int = 0, burnin: int | None = None,
             rng: np.random.Generator | None = None) -> TimeSeries:
    """Run the AR recursion from a zero state and drop the first ``burnin`` samples."""
    if not model.is_stable():
        raise ValueError(f"AR model is unstable (spectral radius {model.spectral_radius():.4g})")
    burnin = default_burnin(model) if burnin is None else int(burnin)
    if burnin < 0:
        raise ValueError("burnin must be nonnegative")
    rng = make_rng(seed) if rng is None else rng
    m, n = model.m, model.n
    total = burnin + N
    Lc = np.linalg.cholesky(model.R)
    e = rng.standard_normal((total, m)) @ Lc.T
    y = np.zeros((total + n, m))
    # y[t + n] is y(t); the first n rows are the zero initial state
    negA = [-Ak for Ak in model.A]
    for t in range(total):
        acc = e[t].copy()
        for k in range(1, n + 1):
            acc += negA[k - 1] @ y[t + n - k]
        y[t + n] = acc
    return TimeSeries(y[n + burnin:])
