"""Group Lasso over a disjoint partition by block coordinate descent.

Each group is first orthonormalized (``X_g^T X_g / n = I``) so that the
exact block minimizer is a group soft-threshold.  The penalty is
``lam * sum_g sqrt(m_g) ||b_g||_2`` in orthonormalized coordinates, which
equals ``lam * sum_g sqrt(m_g / n) ||X_g b_g||_2`` in the original ones.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted, validate_data

from . import _kernels
from .core import standardize
from .exceptions import DimensionMismatch, EmptyPath, NonConvergence, RankDeficientGroup
from .lasso import LambdaPath

__all__ = [
    "GroupPartition",
    "GroupBasis",
    "GroupLassoFit",
    "orthonormalize_groups",
    "group_soft_threshold",
    "fit_group_lasso",
    "group_lambda_max",
    "group_lambda_path",
    "group_lasso_path",
    "GroupLasso",
]

DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = 100_000
_RANK_TOL = 1e-10


@dataclass(frozen=True)
class GroupPartition:
    """Disjoint cover of ``{0, ..., p-1}``.

    Groups are stored as sorted tuples and ordered by their smallest member,
    so two partitions with the same blocks compare equal.
    """

    groups: tuple

    def __post_init__(self):
        groups = [tuple(sorted(int(j) for j in g)) for g in self.groups]
        if any(len(g) == 0 for g in groups):
            raise ValueError("groups must be nonempty")
        groups.sort(key=lambda g: g[0])
        flat = [j for g in groups for j in g]
        if sorted(flat) != list(range(len(flat))):
            raise ValueError("groups must be disjoint and cover 0..p-1")
        object.__setattr__(self, "groups", tuple(groups))

    @classmethod
    def from_labels(cls, labels) -> "GroupPartition":
        labels = np.asarray(labels)
        buckets: dict = {}
        for j, lab in enumerate(labels.tolist()):
            buckets.setdefault(lab, []).append(j)
        return cls(tuple(buckets.values()))

    @classmethod
    def singletons(cls, p: int) -> "GroupPartition":
        return cls(tuple((j,) for j in range(p)))

    @property
    def p(self) -> int:
        return sum(len(g) for g in self.groups)

    @property
    def q(self) -> int:
        return len(self.groups)

    @property
    def sizes(self) -> np.ndarray:
        return np.array([len(g) for g in self.groups])

    def labels(self) -> np.ndarray:
        out = np.empty(self.p, dtype=int)
        for r, g in enumerate(self.groups):
            out[list(g)] = r
        return out

    def union(self, selected) -> np.ndarray:
        """Sorted union of the member indices of the ``selected`` groups."""
        idx = [j for r in selected for j in self.groups[r]]
        return np.array(sorted(idx), dtype=int)

    def mapped(self, index) -> tuple:
        """Groups translated through ``index`` (local position -> global id)."""
        index = np.asarray(index)
        return tuple(tuple(int(index[j]) for j in g) for g in self.groups)

    def satisfies_a1(self, n: int) -> bool:
        """Largest group smaller than the sample size."""
        return int(self.sizes.max()) < n

    def is_refinement_of(self, other: "GroupPartition") -> bool:
        lab = other.labels()
        return all(len({lab[j] for j in g}) == 1 for g in self.groups)

    def __len__(self):
        return self.q


@dataclass
class GroupBasis:
    """Per-group orthonormalizing transforms.

    ``transforms[r]`` maps orthonormalized block coefficients back to the
    original group coefficients; ``dims[r]`` is the retained rank.
    """

    partition: GroupPartition
    transforms: list
    dims: np.ndarray
    rank_deficient: tuple = ()

    @property
    def starts(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.dims)[:-1]]).astype(np.int64)

    def to_original(self, gamma) -> np.ndarray:
        beta = np.zeros(self.partition.p)
        for r, (g, T, s, k) in enumerate(zip(self.partition.groups, self.transforms, self.starts, self.dims)):
            if k:
                beta[list(g)] = T @ gamma[s : s + k]
        return beta


def orthonormalize_groups(X, partition: GroupPartition, *, warn: bool = True):
    """Return ``(Z, basis)`` with ``Z_g^T Z_g / n = I`` for every group.

    A rank-deficient block is reduced to its numerical rank (eigenvalues
    below ``1e-10`` times the largest are dropped); a
    :class:`RankDeficientGroup` warning names the affected groups.
    """
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    if partition.p != p:
        raise DimensionMismatch(f"partition covers {partition.p} columns, X has {p}")
    blocks, transforms, dims, deficient = [], [], [], []
    for r, g in enumerate(partition.groups):
        Xg = X[:, list(g)]
        if len(g) == 1:
            c = float(Xg[:, 0] @ Xg[:, 0] / n)
            if c <= 0:
                T = np.zeros((1, 0))
                deficient.append(r)
            else:
                T = np.array([[1.0 / np.sqrt(c)]])
        else:
            evals, evecs = np.linalg.eigh(Xg.T @ Xg / n)
            keep = evals > _RANK_TOL * max(evals.max(), 0.0)
            if not keep.all():
                deficient.append(r)
            T = evecs[:, keep] / np.sqrt(evals[keep])
        blocks.append(Xg @ T)
        transforms.append(T)
        dims.append(T.shape[1])
    if deficient and warn:
        warnings.warn(
            f"rank-deficient groups reduced in dimension: {deficient}",
            RankDeficientGroup,
            stacklevel=2,
        )
    Z = np.asfortranarray(np.hstack(blocks)) if blocks else np.zeros((n, 0), order="F")
    return Z, GroupBasis(partition, transforms, np.array(dims, dtype=np.int64), tuple(deficient))


def group_soft_threshold(v, gamma: float) -> np.ndarray:
    """``v * max(1 - gamma / ||v||, 0)``."""
    if gamma < 0:
        raise ValueError("threshold must be nonnegative")
    v = np.asarray(v, dtype=float)
    nrm = np.linalg.norm(v)
    if nrm <= gamma:
        return np.zeros_like(v)
    return v * (1.0 - gamma / nrm)


@dataclass
class GroupLassoFit:
    beta: np.ndarray
    lam: float
    selected_groups: np.ndarray
    group_norms: np.ndarray
    kkt_residual: float
    objective: float
    iterations: int
    gamma: np.ndarray = field(repr=False, default=None)
    converged: bool = True
    objective_trace: list = field(default_factory=list, repr=False)


def _group_weights(partition):
    return np.sqrt(partition.sizes.astype(float))


def _col_groups(dims):
    return np.repeat(np.arange(dims.shape[0]), dims)


def _block_norms(gamma, starts, dims):
    cg = _col_groups(dims)
    return np.sqrt(np.bincount(cg, weights=gamma * gamma, minlength=dims.shape[0]))


def _group_kkt(Z, resid, gamma, starts, dims, pen):
    n = Z.shape[0]
    q = dims.shape[0]
    if Z.shape[1] == 0:
        return 0.0
    cg = _col_groups(dims)
    grad = 2.0 / n * (Z.T @ resid)
    nb = np.sqrt(np.bincount(cg, weights=gamma * gamma, minlength=q))
    active = nb > 0
    unit = np.where(active[cg], gamma / np.where(nb > 0, nb, 1.0)[cg], 0.0)
    dev = grad - np.where(active[cg], pen[cg] * unit, 0.0)
    dev_norm = np.sqrt(np.bincount(cg, weights=dev * dev, minlength=q))
    viol = np.where(active, dev_norm, np.maximum(dev_norm - pen, 0.0))
    viol[dims == 0] = 0.0
    return float(viol.max()) if q else 0.0


def _solve_blocks(Z, y, basis, lam, tol, max_iter, gamma_init=None, trace=False):
    n = Z.shape[0]
    dims = basis.dims
    starts = basis.starts
    q = dims.shape[0]
    pen = lam * _group_weights(basis.partition)
    gamma = np.zeros(Z.shape[1]) if gamma_init is None else np.array(gamma_init, dtype=float)
    resid = y - Z @ gamma
    all_groups = np.arange(q, dtype=np.int64)
    history = []

    def objective():
        return float(resid @ resid / n + pen @ _block_norms(gamma, starts, dims))

    if trace:
        history.append(objective())
    it = 0
    while it < max_iter:
        change = _kernels.group_sweep(Z, resid, gamma, all_groups, starts, dims, pen)
        it += 1
        if trace:
            history.append(objective())
        if change < tol:
            resid = y - Z @ gamma
            if _group_kkt(Z, resid, gamma, starts, dims, pen) <= tol:
                break
            continue
        norms_ = _block_norms(gamma, starts, dims)
        active = np.flatnonzero(norms_ > 0).astype(np.int64)
        while it < max_iter:
            change = _kernels.group_sweep(Z, resid, gamma, active, starts, dims, pen)
            it += 1
            if trace:
                history.append(objective())
            if change < tol:
                break
    resid = y - Z @ gamma
    kkt = _group_kkt(Z, resid, gamma, starts, dims, pen)
    norms_ = _block_norms(gamma, starts, dims)
    obj = float(resid @ resid / n + pen @ norms_)
    return gamma, norms_, kkt, obj, it, history


def fit_group_lasso(
    X,
    y,
    partition: GroupPartition,
    lam: float,
    *,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    basis: GroupBasis | None = None,
    Z=None,
    gamma_init=None,
    trace: bool = False,
) -> GroupLassoFit:
    """Minimize ``(1/n)||y - X b||^2 + lam * sum_g sqrt(m_g) ||b_g||_2``.

    ``X`` is orthonormalized group-wise internally unless a precomputed
    ``(Z, basis)`` pair from :func:`orthonormalize_groups` is passed.  The
    returned ``beta`` is in the coordinates of ``X``; ``gamma`` holds the
    orthonormalized coefficients in which the KKT residual is measured.
    """
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    y = np.asarray(y, dtype=float).ravel()
    if Z is None or basis is None:
        X = np.asarray(X, dtype=float)
        if X.shape[0] != y.shape[0]:
            raise DimensionMismatch(f"X has {X.shape[0]} rows, y has {y.shape[0]} entries")
        Z, basis = orthonormalize_groups(X, partition)
    gamma, gnorms, kkt, obj, it, history = _solve_blocks(
        Z, y, basis, lam, tol, max_iter, gamma_init, trace
    )
    fit = GroupLassoFit(
        beta=basis.to_original(gamma),
        lam=float(lam),
        selected_groups=np.flatnonzero(gnorms > 0),
        group_norms=gnorms,
        kkt_residual=kkt,
        objective=obj,
        iterations=it,
        gamma=gamma,
        converged=kkt <= tol,
        objective_trace=history,
    )
    if not fit.converged:
        raise NonConvergence(max_iter, best=fit)
    return fit


def group_lambda_max(X, y, partition: GroupPartition, *, Z=None, basis=None) -> float:
    """``max_g ||(2/n) Z_g^T y|| / sqrt(m_g)`` on the orthonormalized design."""
    y = np.asarray(y, dtype=float).ravel()
    if Z is None or basis is None:
        Z, basis = orthonormalize_groups(X, partition, warn=False)
    n = Z.shape[0]
    grad = 2.0 / n * (Z.T @ y)
    w = _group_weights(basis.partition)
    return float(max(
        (np.linalg.norm(grad[s : s + k]) / w[r] for r, (s, k) in enumerate(zip(basis.starts, basis.dims))),
        default=0.0,
    ))


def group_lambda_path(X, y, partition, grid_size: int = 50, ratio: float = 1e-3, *, Z=None, basis=None) -> LambdaPath:
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")
    if not 0 < ratio < 1:
        raise ValueError("ratio must lie in (0, 1)")
    lmax = group_lambda_max(X, y, partition, Z=Z, basis=basis)
    if not lmax > 0:
        raise EmptyPath("group lambda_max is zero: the response is orthogonal to every group")
    return LambdaPath(lmax * np.geomspace(1.0, ratio, grid_size))


def group_lasso_path(X, y, partition, path, *, Z=None, basis=None, **kwargs) -> list[GroupLassoFit]:
    """Fits along a decreasing path with warm starts."""
    if Z is None or basis is None:
        Z, basis = orthonormalize_groups(X, partition)
    values = path.values if isinstance(path, LambdaPath) else np.asarray(path, dtype=float)
    fits, gamma = [], None
    for lam in values:
        fit = fit_group_lasso(None, y, partition, lam, Z=Z, basis=basis, gamma_init=gamma, **kwargs)
        gamma = fit.gamma
        fits.append(fit)
    return fits


class GroupLasso(BaseEstimator, RegressorMixin):
    """Scikit-learn style group Lasso.

    Parameters
    ----------
    groups : sequence of sequences of int, or array of labels
        Either explicit index groups or one label per column.
    alpha : float
        Penalty level of the ``(1/n)``-scaled objective.
    """

    def __init__(self, groups=None, alpha=1.0, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
        self.groups = groups
        self.alpha = alpha
        self.tol = tol
        self.max_iter = max_iter

    def _partition(self, p):
        if self.groups is None:
            return GroupPartition.singletons(p)
        if isinstance(self.groups, GroupPartition):
            return self.groups
        g = list(self.groups)
        if len(g) == p and all(np.ndim(x) == 0 for x in g):
            return GroupPartition.from_labels(g)
        return GroupPartition(tuple(tuple(x) for x in g))

    def fit(self, X, y):
        X, y = validate_data(self, X, y, y_numeric=True)
        Xs, ys, scaling = standardize(X, y)
        self.partition_ = self._partition(X.shape[1])
        fit = fit_group_lasso(Xs, ys, self.partition_, self.alpha, tol=self.tol, max_iter=self.max_iter)
        self.beta_ = fit.beta
        self.coef_, self.intercept_ = scaling.coef_to_original(fit.beta)
        self.selected_groups_ = fit.selected_groups
        self.n_iter_ = fit.iterations
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = validate_data(self, X, reset=False)
        return X @ self.coef_ + self.intercept_
