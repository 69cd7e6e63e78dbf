"""Linear-model data types, standardization, Gram matrices and norms.

Standardization follows the ``1/n`` convention throughout the package:
after :func:`standardize` every column has mean zero and
``X_j @ X_j / n == 1``.  All penalty scalings in the solvers assume this.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .exceptions import DimensionMismatch, ZeroVarianceColumn

__all__ = [
    "DesignMatrix",
    "ResponseVector",
    "Scaling",
    "standardize",
    "apply_scaling",
    "gram",
    "partition_gram",
    "assemble_gram",
    "norms",
    "support",
    "predict",
    "residual",
    "read_csv_matrix",
]

_EXACT_TOL = 1e-10


@dataclass(frozen=True)
class DesignMatrix:
    """An ``n x p`` predictor matrix together with its column labels."""

    values: np.ndarray
    column_ids: tuple = ()
    standardized: bool = False

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise DimensionMismatch(f"design matrix must be 2-D, got shape {values.shape}")
        n, p = values.shape
        if n < 2 or p < 1:
            raise DimensionMismatch(f"need n >= 2 and p >= 1, got n={n}, p={p}")
        ids = tuple(self.column_ids) if len(self.column_ids) else tuple(range(p))
        if len(ids) != p:
            raise DimensionMismatch(f"{len(ids)} column ids for {p} columns")
        values = np.asfortranarray(values)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "column_ids", ids)

    @property
    def shape(self):
        return self.values.shape

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def columns(self, idx) -> "DesignMatrix":
        idx = list(idx)
        return DesignMatrix(
            self.values[:, idx],
            tuple(self.column_ids[i] for i in idx),
            self.standardized,
        )


@dataclass(frozen=True)
class ResponseVector:
    values: np.ndarray
    centered: bool = False

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).ravel()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def __len__(self):
        return self.values.shape[0]


@dataclass(frozen=True)
class Scaling:
    """Centering and scaling parameters produced by :func:`standardize`."""

    x_mean: np.ndarray
    x_scale: np.ndarray
    y_mean: float = 0.0

    def transform(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.x_mean) / self.x_scale

    def coef_to_original(self, beta) -> tuple[np.ndarray, float]:
        """Map standardized-scale coefficients to ``(coef, intercept)`` in raw units."""
        coef = np.asarray(beta, dtype=float) / self.x_scale
        return coef, float(self.y_mean - self.x_mean @ coef)


def standardize(X, y=None, column_ids: Sequence = ()) -> tuple[DesignMatrix, ResponseVector | None, Scaling]:
    """Center and scale ``X`` (and center ``y``).

    Returns the standardized design, the centered response (``None`` when
    ``y`` is not given) and the :class:`Scaling` needed to map fitted
    coefficients and new data back and forth.

    Raises
    ------
    ZeroVarianceColumn
        If a column of ``X`` is constant.
    """
    if isinstance(X, DesignMatrix):
        column_ids = column_ids or X.column_ids
    A = np.array(X, dtype=float)
    if A.ndim != 2:
        raise DimensionMismatch(f"X must be 2-D, got shape {A.shape}")
    n = A.shape[0]
    mean = A.mean(axis=0)
    A -= mean
    scale = np.sqrt(np.einsum("ij,ij->j", A, A) / n)
    for j, s in enumerate(scale):
        if not s > _EXACT_TOL * max(1.0, abs(mean[j])):
            raise ZeroVarianceColumn(column_ids[j] if len(column_ids) else j)
    A /= scale
    dm = DesignMatrix(A, column_ids, standardized=True)

    yv, y_mean = None, 0.0
    if y is not None:
        yy = np.asarray(y, dtype=float).ravel()
        if yy.shape[0] != n:
            raise DimensionMismatch(f"y has {yy.shape[0]} entries, X has {n} rows")
        y_mean = float(yy.mean())
        yv = ResponseVector(yy - y_mean, centered=True)
    return dm, yv, Scaling(mean, scale, y_mean)


def apply_scaling(X, scaling: Scaling) -> np.ndarray:
    """Transform new data (e.g. a validation set) with training parameters."""
    return scaling.transform(X)


def gram(X) -> np.ndarray:
    """Scaled Gram matrix ``X.T @ X / n``."""
    A = np.asarray(X, dtype=float)
    G = A.T @ A / A.shape[0]
    # symmetrize away roundoff so downstream eigen-solvers see an exact symmetric matrix
    return (G + G.T) / 2


def partition_gram(sigma, S):
    """Split ``sigma`` into the blocks ``(S11, S12, S21, S22)`` for index set ``S``."""
    sigma = np.asarray(sigma)
    S = np.asarray(sorted(S), dtype=int)
    Sc = np.setdiff1d(np.arange(sigma.shape[0]), S)
    return (
        sigma[np.ix_(S, S)],
        sigma[np.ix_(S, Sc)],
        sigma[np.ix_(Sc, S)],
        sigma[np.ix_(Sc, Sc)],
    )


def assemble_gram(blocks, S, p) -> np.ndarray:
    """Inverse of :func:`partition_gram`."""
    s11, s12, s21, s22 = blocks
    S = np.asarray(sorted(S), dtype=int)
    Sc = np.setdiff1d(np.arange(p), S)
    out = np.empty((p, p))
    out[np.ix_(S, S)] = s11
    out[np.ix_(S, Sc)] = s12
    out[np.ix_(Sc, S)] = s21
    out[np.ix_(Sc, Sc)] = s22
    return out


def norms(v) -> tuple[float, float, float]:
    """Return ``(l1, squared l2, linf)`` of a coefficient vector."""
    v = np.asarray(v, dtype=float).ravel()
    if v.size == 0:
        return 0.0, 0.0, 0.0
    a = np.abs(v)
    return float(a.sum()), float(v @ v), float(a.max())


def support(beta, tol: float = 0.0) -> np.ndarray:
    """Indices ``j`` with ``|beta_j| > tol``."""
    return np.flatnonzero(np.abs(np.asarray(beta)) > tol)


def predict(X, beta) -> np.ndarray:
    A = np.asarray(X, dtype=float)
    b = np.asarray(beta, dtype=float).ravel()
    if A.ndim != 2 or A.shape[1] != b.shape[0]:
        raise DimensionMismatch(f"X has shape {A.shape}, beta has length {b.shape[0]}")
    return A @ b


def residual(X, y, beta) -> np.ndarray:
    y = np.asarray(y, dtype=float).ravel()
    fitted = predict(X, beta)
    if fitted.shape[0] != y.shape[0]:
        raise DimensionMismatch(f"y has {y.shape[0]} entries, X has {fitted.shape[0]} rows")
    return y - fitted


def read_csv_matrix(path, *, response_column: str | None = None):
    """Read a numeric CSV with a header row.

    Returns ``(DesignMatrix, y)`` where ``y`` is the named response column
    (removed from the design) or ``None``.  Parse failures raise
    :class:`ValueError` naming the offending line.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        rows = []
        for row in reader:
            if not row:
                continue
            if len(row) != len(header):
                raise ValueError(
                    f"{path}: line {reader.line_num}: expected {len(header)} fields, got {len(row)}"
                )
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise ValueError(f"{path}: line {reader.line_num}: {exc}") from None
    if not rows:
        raise ValueError(f"{path}: no data rows")
    values = np.asarray(rows, dtype=float)
    y = None
    if response_column is not None:
        if response_column not in header:
            raise ValueError(f"{path}: response column {response_column!r} not found")
        k = header.index(response_column)
        y = values[:, k].copy()
        values = np.delete(values, k, axis=1)
        header = header[:k] + header[k + 1 :]
    return DesignMatrix(values, tuple(header)), y
