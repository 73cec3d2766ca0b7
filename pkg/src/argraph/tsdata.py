"""Time-series ingestion and windowed covariance lags."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .polyalg import MatrixPoly, toeplitz


class IngestionError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """``samples[t]`` is ``y(t+1)``; shape ``(N, m)``."""

    samples: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim == 1:
            s = s[:, None]
        if s.ndim != 2:
            raise ValueError("samples must be a 2-d array (N, m)")
        if not np.all(np.isfinite(s)):
            raise ValueError("samples contain non-finite values")
        object.__setattr__(self, "samples", s)

    @property
    def N(self) -> int:
        return self.samples.shape[0]

    @property
    def m(self) -> int:
        return self.samples.shape[1]

    def demeaned(self) -> "TimeSeries":
        return TimeSeries(self.samples - self.samples.mean(axis=0))


def load_timeseries(path, delimiter: str = ",", header: bool | None = None) -> TimeSeries:
    """Read a numeric CSV (rows are time, columns are variables).

    A single non-numeric first row is treated as a header when ``header`` is
    None. Errors name the offending 1-based file row.
    """
    rows = []
    width = None
    with open(path, newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        for lineno, row in enumerate(reader, start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if lineno == 1 and header is not False:
                try:
                    [float(c) for c in row]
                except ValueError:
                    continue
                if header:
                    continue
            try:
                vals = [float(c) for c in row]
            except ValueError as exc:
                raise IngestionError(f"{path}: row {lineno}: cannot parse {row!r}") from exc
            if width is None:
                width = len(vals)
            elif len(vals) != width:
                raise IngestionError(
                    f"{path}: row {lineno}: expected {width} columns, got {len(vals)}")
            if not all(np.isfinite(vals)):
                raise IngestionError(f"{path}: row {lineno}: non-finite value in {row!r}")
            rows.append(vals)
    if not rows:
        raise IngestionError(f"{path}: no data rows")
    return TimeSeries(np.array(rows))


def write_timeseries(y: TimeSeries, path, header: list[str] | None = None) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        if header:
            w.writerow(header)
        for row in y.samples:
            w.writerow([f"{v:.17g}" for v in row])


def _pairwise_gram(A: np.ndarray, B: np.ndarray, chunk: int = 256) -> np.ndarray:
    """``A.T @ B`` with chunked products combined by a pairwise sum."""
    if A.shape[0] <= chunk:
        return A.T @ B
    parts = np.stack([A[i:i + chunk].T @ B[i:i + chunk] for i in range(0, A.shape[0], chunk)])
    # np.sum over the leading axis of a contiguous stack uses pairwise summation
    return parts.sum(axis=0)


def covariance_lags(y: TimeSeries, n: int) -> MatrixPoly:
    """``R_k = 1/(N-n) * sum_{t=1}^{N-k} y(t+k) y(t)^T`` for ``k = 0..n``."""
    N = y.N
    if N <= n:
        raise ValueError(f"need N > n, got N={N}, n={n}")
    Y = y.samples
    out = np.empty((n + 1, y.m, y.m))
    for k in range(n + 1):
        out[k] = _pairwise_gram(Y[k:], Y[:N - k])
    out /= N - n
    return MatrixPoly(out)


def check_toeplitz_pd(Rhat: MatrixPoly) -> float:
    """Minimum eigenvalue of ``T(Rhat)``; nonpositive means the data are too few."""
    return float(np.linalg.eigvalsh(toeplitz(Rhat))[0])
