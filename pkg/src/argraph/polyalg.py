"""Algebra of matrix pseudo-polynomials and their block-Toeplitz embeddings.

A :class:`MatrixPoly` holds coefficient blocks ``[Y_0, Y_1, ..., Y_n]`` (each
``m x m``, ``Y_0`` symmetric) and represents the Hermitian function on the
unit circle

    Y(theta) = Y_0 + 1/2 * sum_k (Y_k e^{-ik theta} + Y_k^T e^{ik theta}).

``toeplitz`` builds the symmetric block-Toeplitz matrix whose first block row
is ``[Y_0 ... Y_n]`` and ``adjoint_D`` is its adjoint under the trace inner
products, so that ``eval_poly(adjoint_D(X)) == Delta X Delta^*``.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg

DEFAULT_GRID = 512


class InfeasibleError(ValueError):
    """Raised when a matrix that must be positive definite is not."""


@dataclass(frozen=True, eq=False)
class MatrixPoly:
    """Coefficient blocks of an order-``n`` matrix pseudo-polynomial.

    ``blocks`` is stored as an ``(n + 1, m, m)`` float array. ``Y_0`` is
    symmetrized on construction.
    """

    blocks: np.ndarray

    def __post_init__(self):
        b = np.array(self.blocks, dtype=float)
        if b.ndim == 2:
            b = b[None]
        if b.ndim != 3 or b.shape[1] != b.shape[2] or b.shape[1] == 0:
            raise ValueError(f"blocks must have shape (n+1, m, m), got {b.shape}")
        y0 = b[0]
        asym = np.linalg.norm(y0 - y0.T)
        scale = np.linalg.norm(y0)
        if asym > 1e-8 * max(scale, 1.0):
            warnings.warn(f"Y_0 asymmetric by {asym:.3g}; symmetrizing", stacklevel=3)
        b[0] = 0.5 * (y0 + y0.T)
        b.setflags(write=False)
        object.__setattr__(self, "blocks", b)

    @property
    def m(self) -> int:
        return self.blocks.shape[1]

    @property
    def n(self) -> int:
        return self.blocks.shape[0] - 1

    def __getitem__(self, k):
        return self.blocks[k]

    def __add__(self, other):
        return MatrixPoly(self.blocks + _blocks(other))

    def __sub__(self, other):
        return MatrixPoly(self.blocks - _blocks(other))

    def __mul__(self, a):
        return MatrixPoly(self.blocks * float(a))

    __rmul__ = __mul__

    def __neg__(self):
        return MatrixPoly(-self.blocks)

    def inner(self, other) -> float:
        """Trace inner product ``sum_k tr(Y_k Z_k^T)``."""
        return float(np.vdot(self.blocks, _blocks(other)))

    def norm(self) -> float:
        return float(np.linalg.norm(self.blocks))

    @classmethod
    def zeros(cls, m: int, n: int) -> "MatrixPoly":
        return cls(np.zeros((n + 1, m, m)))

    @classmethod
    def identity(cls, m: int, n: int) -> "MatrixPoly":
        b = np.zeros((n + 1, m, m))
        b[0] = np.eye(m)
        return cls(b)

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "n": self.n,
            "blocks": [[float(v) for v in blk.ravel()] for blk in self.blocks],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MatrixPoly":
        m, n = int(d["m"]), int(d["n"])
        blocks = np.asarray(d["blocks"], dtype=float)
        if blocks.shape != (n + 1, m * m):
            raise ValueError(f"expected {n + 1} blocks of {m * m} entries, got {blocks.shape}")
        return cls(blocks.reshape(n + 1, m, m))

    def to_json(self) -> str:
        # repr() of a float is the shortest string that round-trips exactly
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, s: str) -> "MatrixPoly":
        return cls.from_dict(json.loads(s))


def _blocks(x) -> np.ndarray:
    return x.blocks if isinstance(x, MatrixPoly) else np.asarray(x, dtype=float)


def toeplitz(Y: MatrixPoly) -> np.ndarray:
    """Symmetric block-Toeplitz matrix with first block row ``[Y_0 ... Y_n]``."""
    m, n = Y.m, Y.n
    out = np.empty((m * (n + 1), m * (n + 1)))
    for h in range(n + 1):
        for j in range(n + 1):
            blk = Y[j - h] if j >= h else Y[h - j].T
            out[h * m:(h + 1) * m, j * m:(j + 1) * m] = blk
    return out


def adjoint_D(X: np.ndarray, m: int) -> MatrixPoly:
    """Adjoint of :func:`toeplitz`: ``D_0 = sum_h X_hh``, ``D_k = 2 sum_h X_{h,h+k}``."""
    X = np.asarray(X, dtype=float)
    n = X.shape[0] // m - 1
    if X.shape != (m * (n + 1), m * (n + 1)):
        raise ValueError(f"X shape {X.shape} is not a multiple of m={m}")
    Xb = X.reshape(n + 1, m, n + 1, m).transpose(0, 2, 1, 3)
    out = np.empty((n + 1, m, m))
    out[0] = np.einsum("hhab->ab", Xb)
    for k in range(1, n + 1):
        idx = np.arange(n + 1 - k)
        out[k] = 2.0 * Xb[idx, idx + k].sum(axis=0)
    return MatrixPoly(out)


def eval_poly(S: MatrixPoly, theta) -> np.ndarray:
    """Evaluate ``S`` on the unit circle.

    ``theta`` may be a scalar (returns ``m x m``) or an array of angles
    (returns ``(len(theta), m, m)``). The result is Hermitian.
    """
    th = np.atleast_1d(np.asarray(theta, dtype=float))
    k = np.arange(1, S.n + 1)
    e = np.exp(-1j * np.outer(th, k))  # (G, n)
    half = 0.5 * np.einsum("gk,kab->gab", e, S.blocks[1:])
    out = S.blocks[0][None] + half + np.conj(half.transpose(0, 2, 1))
    return out[0] if np.ndim(theta) == 0 else out


def uniform_grid(gridsize: int = DEFAULT_GRID) -> np.ndarray:
    """``gridsize`` equispaced angles on ``[-pi, pi)``; contains 0 and, if even, -pi."""
    return -np.pi + 2.0 * np.pi * np.arange(gridsize) / gridsize


def grid_min_eig(S: MatrixPoly, gridsize: int = DEFAULT_GRID) -> float:
    """Smallest eigenvalue of ``S(theta)`` over a uniform grid of angles.

    Only ``[0, pi]`` needs evaluating since ``S(-theta)`` is the conjugate of
    ``S(theta)`` and has the same spectrum.
    """
    if gridsize < 2 * (S.n + 1):
        raise ValueError("gridsize must be at least 2(n+1)")
    th = uniform_grid(gridsize)
    th = th[th >= 0]
    if gridsize % 2 == 0:
        th = np.append(th, np.pi)
    vals = np.linalg.eigvalsh(eval_poly(S, th))
    return float(vals.min())


def group_maxnorm(S: MatrixPoly, j: int, h: int) -> float:
    """``max(|(S_0)_jh|, max_k |(S_k)_jh|, max_k |(S_k)_hj|)`` for ``j >= h`` (0-based)."""
    if not (0 <= h <= j < S.m):
        raise IndexError(f"need 0 <= h <= j < {S.m}, got ({j}, {h})")
    return float(max(np.abs(S.blocks[:, j, h]).max(), np.abs(S.blocks[1:, h, j]).max(initial=0.0)))


def group_maxnorms(S: MatrixPoly) -> np.ndarray:
    """All ``q_jh`` as a symmetric ``m x m`` array."""
    a = np.abs(S.blocks)
    q = np.maximum(a.max(axis=0), a[1:].max(axis=0, initial=0.0).T)
    return np.maximum(q, q.T)


def block_schur(B: np.ndarray, m: int):
    """Schur complement of the trailing block of ``B`` and the predictor stack.

    Returns ``(W, a)`` with ``W = B_00 - B_01 B_11^{-1} B_10`` and
    ``a = [I; -B_11^{-1} B_10]`` so that ``B a = [W; 0]``. Raises
    :class:`InfeasibleError` if ``B_11`` is not positive definite.
    """
    B = np.asarray(B, dtype=float)
    if B.shape[0] == m:
        return B.copy(), np.eye(m)
    B11 = B[m:, m:]
    B10 = B[m:, :m]
    try:
        c = linalg.cho_factor(B11, lower=True, check_finite=False)
    except linalg.LinAlgError as exc:
        raise InfeasibleError("trailing block is not positive definite") from exc
    sol = linalg.cho_solve(c, B10, check_finite=False)
    W = B[:m, :m] - B10.T @ sol
    W = 0.5 * (W + W.T)
    a = np.vstack([np.eye(m), -sol])
    return W, a


def logdet_pd(A: np.ndarray) -> float:
    """``log|A|`` for symmetric positive definite ``A``; raises if not PD."""
    try:
        c = linalg.cholesky(A, lower=True, check_finite=False)
    except linalg.LinAlgError as exc:
        raise InfeasibleError("matrix is not positive definite") from exc
    return 2.0 * float(np.log(np.diag(c)).sum())


def symmetrize(A: np.ndarray) -> np.ndarray:
    return 0.5 * (A + A.T)
