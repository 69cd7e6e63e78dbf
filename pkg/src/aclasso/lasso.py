"""Lasso by cyclic coordinate descent, with paths and reweighted variants.

The objective is ``(1/n) ||y - X b||_2^2 + lam * ||b||_1``.  Note the
absence of the usual factor 1/2: stationarity therefore reads
``(2/n) X_j^T (y - X b) = lam * sign(b_j)`` and the smallest penalty giving
the null model is ``max_j |(2/n) X_j^T y|``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted, validate_data

from . import _kernels
from .core import standardize, support
from .exceptions import DimensionMismatch, EmptyPath, NonConvergence

__all__ = [
    "LassoFit",
    "LambdaPath",
    "soft_threshold",
    "lasso_objective",
    "lasso_kkt_residual",
    "fit_lasso",
    "lambda_max",
    "lambda_path",
    "lasso_path",
    "adaptive_weights",
    "fit_adaptive_lasso",
    "threshold_fit",
    "Lasso",
]

DEFAULT_TOL = 1e-7
DEFAULT_KKT_TOL = 1e-6
DEFAULT_MAX_ITER = 100_000
ADAPTIVE_DELTA = 1e-3
# active-set sweeps between exact orthant solves
ORTHANT_EVERY = 10


@dataclass
class LassoFit:
    beta: np.ndarray
    lam: float
    iterations: int
    kkt_residual: float
    objective: float
    weights: np.ndarray | None = None
    converged: bool = True
    objective_trace: list = field(default_factory=list, repr=False)

    @property
    def support(self) -> np.ndarray:
        return support(self.beta)


@dataclass(frozen=True)
class LambdaPath:
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.size == 0:
            raise EmptyPath("lambda path is empty")
        if v.size > 1 and not np.all(np.diff(v) < 0):
            raise ValueError("lambda path must be strictly decreasing")
        object.__setattr__(self, "values", v)

    @property
    def grid_size(self) -> int:
        return self.values.size

    def __iter__(self):
        return iter(self.values)

    def __len__(self):
        return self.values.size


def soft_threshold(z, gamma):
    """``sign(z) * max(|z| - gamma, 0)``; works elementwise on arrays."""
    if np.any(np.asarray(gamma) < 0):
        raise ValueError("threshold must be nonnegative")
    return np.sign(z) * np.maximum(np.abs(z) - gamma, 0.0)


def _prepare(X, y):
    X = np.asfortranarray(np.asarray(X, dtype=float))
    y = np.ascontiguousarray(np.asarray(y, dtype=float).ravel())
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise DimensionMismatch(f"X has shape {X.shape}, y has length {y.shape[0]}")
    return X, y


def _penalties(lam, weights, p):
    if weights is None:
        return np.full(p, float(lam))
    w = np.asarray(weights, dtype=float).ravel()
    if w.shape[0] != p:
        raise DimensionMismatch(f"{w.shape[0]} weights for {p} coefficients")
    if np.any(w < 0):
        raise ValueError("penalty weights must be nonnegative")
    return float(lam) * w


def lasso_objective(X, y, beta, lam, weights=None) -> float:
    X, y = _prepare(X, y)
    r = y - X @ beta
    pen = _penalties(lam, weights, X.shape[1])
    return float(r @ r / X.shape[0] + pen @ np.abs(beta))


def lasso_kkt_residual(X, y, beta, lam, weights=None) -> float:
    """Largest violation of the (weighted) Lasso optimality conditions."""
    X, y = _prepare(X, y)
    n, p = X.shape
    beta = np.asarray(beta, dtype=float)
    grad = 2.0 / n * (X.T @ (y - X @ beta))
    pen = _penalties(lam, weights, p)
    return _kkt_from_grad(grad, beta, pen)


def _kkt_from_grad(grad, beta, pen):
    active = beta != 0
    viol = np.where(
        active,
        np.abs(grad - pen * np.sign(beta)),
        np.maximum(np.abs(grad) - pen, 0.0),
    )
    return float(viol.max()) if viol.size else 0.0


def _orthant_step(X, y, beta, pen) -> bool:
    """Jump to the minimizer of the objective restricted to the current orthant.

    With the active set ``A`` and signs ``s`` held fixed the objective is a
    smooth quadratic whose stationary point solves
    ``(X_A^T X_A / n) b = X_A^T y / n - pen_A * s / 2``.  The step is taken
    in full if that point keeps the signs ``s``; otherwise the iterate moves
    toward it until the first coefficient reaches zero.  Either way the
    objective cannot increase.  This removes the slow tail of coordinate descent on
    ill-conditioned active sets.
    """
    A = np.flatnonzero(beta)
    n = X.shape[0]
    if A.size == 0:
        return False
    XA = X[:, A]
    s = np.sign(beta[A])
    if A.size >= n:
        return _null_step(XA, beta, A, s, pen)
    G = XA.T @ XA / n
    rhs = XA.T @ y / n - 0.5 * pen[A] * s
    try:
        if np.linalg.cond(G) > 1e10:
            return _null_step(XA, beta, A, s, pen)
        b = np.linalg.solve(G, rhs)
    except np.linalg.LinAlgError:
        return False
    flipped = np.sign(b) != s
    if not flipped.any():
        beta[A] = b
        return True
    # walk toward b and stop where the first coefficient reaches zero; the
    # restricted objective is convex along the segment so it still decreases
    cur = beta[A]
    t_cross = cur[flipped] / (cur[flipped] - b[flipped])
    k = int(np.argmin(t_cross))
    t = float(t_cross[k])
    if t <= 0:
        return False
    new = cur + t * (b - cur)
    new[np.flatnonzero(flipped)[k]] = 0.0
    new[np.sign(new) != s] = 0.0
    beta[A] = new
    return True


def _null_step(XA, beta, A, s, pen) -> bool:
    """Move along a null direction of ``X_A`` until a coefficient hits zero.

    The fitted values do not change and the direction is oriented so the
    penalty does not grow, so the objective cannot increase.  This shrinks
    active sets that are larger than the rank of the design.
    """
    _, sv, Vt = np.linalg.svd(XA, full_matrices=True)
    rank_tol = 1e-10 * max(sv[0], 1e-300) if sv.size else 0.0
    if sv.size == A.size and sv[-1] > rank_tol:
        return False
    d = Vt[-1]
    if (pen[A] * s) @ d > 0:
        d = -d
    shrinking = np.sign(d) == -s
    if not shrinking.any():
        d = -d
        shrinking = np.sign(d) == -s
    t = np.abs(beta[A][shrinking] / d[shrinking])
    k = int(np.argmin(t))
    new = beta[A] + t[k] * d
    new[np.flatnonzero(shrinking)[k]] = 0.0
    new[np.sign(new) != s] = 0.0
    beta[A] = new
    return True


def fit_lasso(
    X,
    y,
    lam: float,
    *,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    kkt_tol: float = DEFAULT_KKT_TOL,
    weights=None,
    beta_init=None,
    trace: bool = False,
) -> LassoFit:
    """Minimize ``(1/n)||y - Xb||^2 + lam * sum_j w_j |b_j|`` by coordinate descent.

    Sweeps are cyclic in column order.  After every full pass the solver
    iterates on the current active set until coefficient changes fall below
    ``tol``, then verifies with another full pass.  It stops once a full pass
    moves no coefficient by ``tol`` or more and the KKT residual is at most
    ``kkt_tol``.

    Parameters
    ----------
    X : array-like of shape (n, p)
        Design, normally standardized.  Columns of any nonzero norm are
        handled exactly.
    y : array-like of shape (n,)
    lam : float
        Penalty level, ``lam >= 0``.
    weights : array-like of shape (p,), optional
        Per-coefficient penalty multipliers (adaptive Lasso).
    beta_init : array-like of shape (p,), optional
        Warm start.
    trace : bool
        Record the objective after every sweep in ``objective_trace``.

    Raises
    ------
    NonConvergence
        After ``max_iter`` sweeps; the best iterate is attached.
    """
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    X, y = _prepare(X, y)
    n, p = X.shape
    pen = _penalties(lam, weights, p)
    colsq = np.einsum("ij,ij->j", X, X) / n
    if beta_init is None:
        beta = np.zeros(p)
        resid = y.copy()
    else:
        beta = np.array(beta_init, dtype=float).ravel()
        if beta.shape[0] != p:
            raise DimensionMismatch(f"beta_init has length {beta.shape[0]}, expected {p}")
        beta[colsq <= 0] = 0.0
        resid = y - X @ beta
    all_idx = np.arange(p, dtype=np.int64)
    history = []

    def objective():
        return float(resid @ resid / n + pen @ np.abs(beta))

    if trace:
        history.append(objective())

    it = 0
    kkt = np.inf
    while True:
        if it >= max_iter:
            break
        change = _kernels.lasso_sweep(X, resid, beta, all_idx, pen, colsq)
        it += 1
        if trace:
            history.append(objective())
        if change < tol:
            resid = y - X @ beta
            kkt = _kkt_from_grad(2.0 / n * (X.T @ resid), beta, pen)
            if kkt <= kkt_tol:
                break
            continue
        active = np.flatnonzero(beta).astype(np.int64)
        inner = 0
        while it < max_iter:
            change = _kernels.lasso_sweep(X, resid, beta, active, pen, colsq)
            it += 1
            inner += 1
            if trace:
                history.append(objective())
            if change < tol:
                break
            if inner % ORTHANT_EVERY == 0 and _orthant_step(X, y, beta, pen):
                resid = y - X @ beta
                if trace:
                    history.append(objective())

    resid = y - X @ beta
    obj = float(resid @ resid / n + pen @ np.abs(beta))
    kkt = _kkt_from_grad(2.0 / n * (X.T @ resid), beta, pen)
    fit = LassoFit(
        beta=beta,
        lam=float(lam),
        iterations=it,
        kkt_residual=kkt,
        objective=obj,
        weights=None if weights is None else np.asarray(weights, dtype=float),
        converged=kkt <= kkt_tol,
        objective_trace=history,
    )
    if not fit.converged:
        raise NonConvergence(max_iter, best=fit)
    return fit


def lambda_max(X, y, weights=None) -> float:
    """Smallest ``lam`` for which the (weighted) Lasso solution is zero."""
    X, y = _prepare(X, y)
    score = np.abs(2.0 / X.shape[0] * (X.T @ y))
    if weights is not None:
        w = np.asarray(weights, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            score = np.where(w > 0, score / w, np.where(score > 0, np.inf, 0.0))
    return float(score.max())


def lambda_path(X, y, grid_size: int = 50, ratio: float = 1e-3, weights=None) -> LambdaPath:
    """Geometric grid from ``lambda_max`` down to ``lambda_max * ratio``."""
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")
    if not 0 < ratio < 1:
        raise ValueError("ratio must lie in (0, 1)")
    lmax = lambda_max(X, y, weights)
    if not lmax > 0 or not np.isfinite(lmax):
        raise EmptyPath("lambda_max is zero: the response is orthogonal to every column")
    return LambdaPath(lmax * np.geomspace(1.0, ratio, grid_size))


def lasso_path(X, y, path, *, weights=None, **kwargs) -> list[LassoFit]:
    """Fit along ``path`` (decreasing) with warm starts."""
    X, y = _prepare(X, y)
    values = path.values if isinstance(path, LambdaPath) else np.asarray(path, dtype=float)
    fits = []
    beta = None
    for lam in values:
        fit = fit_lasso(X, y, lam, weights=weights, beta_init=beta, **kwargs)
        beta = fit.beta
        fits.append(fit)
    return fits


def adaptive_weights(beta_init, delta: float = ADAPTIVE_DELTA) -> np.ndarray:
    """``w_j = 1 / (|b_j| + delta)``."""
    return 1.0 / (np.abs(np.asarray(beta_init, dtype=float)) + delta)


def fit_adaptive_lasso(X, y, lam, initial_fit, *, delta: float = ADAPTIVE_DELTA, **kwargs) -> LassoFit:
    """Weighted Lasso with weights built from ``initial_fit`` (a fit or a coefficient vector)."""
    beta0 = initial_fit.beta if isinstance(initial_fit, LassoFit) else initial_fit
    return fit_lasso(X, y, lam, weights=adaptive_weights(beta0, delta), **kwargs)


def threshold_fit(fit, tau: float) -> np.ndarray:
    """Zero every coefficient with ``|b_j| <= tau``."""
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    beta = np.array(fit.beta if isinstance(fit, LassoFit) else fit, dtype=float)
    if tau > 0:
        beta[np.abs(beta) <= tau] = 0.0
    return beta


class Lasso(BaseEstimator, RegressorMixin):
    """Scikit-learn style wrapper around :func:`fit_lasso`.

    The data are standardized internally (``1/n`` convention) and the
    fitted coefficients are reported in the original units.

    Parameters
    ----------
    alpha : float
        Penalty level ``lam`` of the ``(1/n)``-scaled objective.
    tol, max_iter :
        Passed to :func:`fit_lasso`.
    """

    def __init__(self, alpha=1.0, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
        self.alpha = alpha
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y):
        X, y = validate_data(self, X, y, y_numeric=True)
        Xs, ys, scaling = standardize(X, y)
        fit = fit_lasso(Xs, ys, self.alpha, tol=self.tol, max_iter=self.max_iter)
        self.beta_ = fit.beta
        self.coef_, self.intercept_ = scaling.coef_to_original(fit.beta)
        self.n_iter_ = fit.iterations
        self.kkt_residual_ = fit.kkt_residual
        self.scaling_ = scaling
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = validate_data(self, X, reset=False)
        return X @ self.coef_ + self.intercept_
