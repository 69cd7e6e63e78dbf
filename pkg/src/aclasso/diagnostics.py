"""Numerical checks of irrepresentable, beta-min and related conditions.

All functions take a Gram (covariance) matrix ``sigma`` or a standardized
design and plain index sets; nothing here fits a model.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import gram
from .exceptions import SingularGroupGram, SingularSigma11
from .group_lasso import GroupPartition

__all__ = [
    "IrReport",
    "GirReport",
    "ir_theta_exact",
    "ir_theta_bound",
    "gir_check",
    "rw_matrix",
    "beta_min_check",
    "group_beta_min_check",
    "phi2_proxy",
    "lambda0_empirical",
    "lasso_oracle_bound",
    "lasso_oracle_lhs",
    "group_oracle_bound",
    "group_oracle_lhs",
]

SINGULAR_TOL = 1e-10
DEFAULT_D = 4.0
GIR_RESTARTS = 64


def _finite_or_none(v):
    return v if math.isfinite(v) else None


@dataclass
class IrReport:
    theta_exact: float
    theta_bound: float
    min_eigen_s11: float
    holds_strict: bool
    active_set: list = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["theta_bound"] = _finite_or_none(self.theta_bound)
        return d

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


@dataclass
class GirReport:
    """Group irrepresentable diagnostics.

    ``group_ir_values[i]`` belongs to ``noise_groups[i]``.  The values come
    from a multi-start ascent and are lower bounds on the true maxima
    (``lower_bound=True``) unless every noise group is a singleton and
    every active group is a singleton, in which case they are exact.
    """

    rw_min_eigen: float
    group_ir_values: list
    noise_groups: list
    holds: bool
    eps: float = 0.0
    lower_bound: bool = True

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def _as_sigma(sigma):
    S = np.asarray(sigma, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError("sigma must be a square matrix")
    return S


def _split(sigma, S):
    S = np.asarray(sorted({int(j) for j in S}), dtype=int)
    p = sigma.shape[0]
    if S.size == 0:
        raise ValueError("active set must be nonempty")
    if S.min() < 0 or S.max() >= p:
        raise IndexError("active set index out of range")
    rest = np.setdiff1d(np.arange(p), S)
    s11 = sigma[np.ix_(S, S)]
    lmin = float(np.linalg.eigvalsh(s11)[0])
    if lmin <= SINGULAR_TOL:
        raise SingularSigma11(f"Sigma_11 has smallest eigenvalue {lmin:.3g}")
    return S, rest, s11, lmin


def ir_theta_bound(sigma, S) -> float:
    """``sqrt(s) * max_{j not in S} ||sigma_{j,S}||_2 / lambda_min(Sigma_11)^2``.

    Raises
    ------
    SingularSigma11
    """
    sigma = _as_sigma(sigma)
    S, rest, _, lmin = _split(sigma, S)
    if rest.size == 0:
        return 0.0
    row_norms = np.sqrt((sigma[np.ix_(rest, S)] ** 2).sum(axis=1))
    return float(np.sqrt(S.size) * row_norms.max() / lmin**2)


def ir_theta_exact(sigma, S) -> IrReport:
    """Exact uniform irrepresentable constant for the set ``S``.

    ``max_{||tau||_inf <= 1} ||Sigma_21 Sigma_11^{-1} tau||_inf`` equals the
    largest row l1 norm of ``Sigma_21 Sigma_11^{-1}``, because a linear form
    attains its maximum over the cube at a vertex.

    Raises
    ------
    SingularSigma11
        When ``Sigma_11(S)`` has smallest eigenvalue ``<= 1e-10``.
    """
    sigma = _as_sigma(sigma)
    S_idx, rest, s11, lmin = _split(sigma, S)
    if rest.size == 0:
        theta = 0.0
    else:
        A = np.linalg.solve(s11, sigma[np.ix_(S_idx, rest)]).T
        theta = float(np.abs(A).sum(axis=1).max())
    return IrReport(
        theta_exact=theta,
        theta_bound=ir_theta_bound(sigma, S_idx),
        min_eigen_s11=lmin,
        holds_strict=theta < 1.0,
        active_set=S_idx.tolist(),
    )


def _inv_sqrt(M, pinv):
    w, V = np.linalg.eigh(M)
    tol = SINGULAR_TOL * max(1.0, float(np.abs(w).max()))
    if w.min() <= tol:
        if not pinv:
            return None
        inv = np.where(w > tol, 1.0 / np.sqrt(np.clip(w, tol, None)), 0.0)
    else:
        inv = 1.0 / np.sqrt(w)
    return (V * inv) @ V.T


def rw_matrix(sigma, partition: GroupPartition, active_groups, *, pinv: bool = False) -> np.ndarray:
    """Block matrix of ``Sigma_rr^{-1/2} Sigma_rl Sigma_ll^{-1/2}`` over active groups."""
    sigma = _as_sigma(sigma)
    groups = [np.asarray(partition.groups[r]) for r in active_groups]
    roots = []
    for r, g in zip(active_groups, groups):
        R = _inv_sqrt(sigma[np.ix_(g, g)], pinv)
        if R is None:
            raise SingularGroupGram(f"within-group Gram of group {r} is singular")
        roots.append(R)
    idx = np.concatenate(groups) if groups else np.array([], dtype=int)
    D = np.zeros((idx.size, idx.size))
    offs = np.cumsum([0] + [g.size for g in groups])
    for a, (ga, Ra) in enumerate(zip(groups, roots)):
        for b, (gb, Rb) in enumerate(zip(groups, roots)):
            D[offs[a] : offs[a + 1], offs[b] : offs[b + 1]] = Ra @ sigma[np.ix_(ga, gb)] @ Rb
    return (D + D.T) / 2


def _ball_product_max(M, blocks, restarts, rng):
    """Approximate ``max ||M tau||_2`` over ``tau`` with unit-norm blocks.

    Block-wise ascent: with ``u = M tau / ||M tau||`` each block is set to
    the unit vector along ``M_l^T u``, which never decreases the objective
    (it maximizes the linearization of a convex function).
    """
    best = 0.0
    k = M.shape[1]
    for _ in range(restarts):
        tau = rng.standard_normal(k)
        for s, e in blocks:
            tau[s:e] /= max(np.linalg.norm(tau[s:e]), 1e-300)
        val = np.linalg.norm(M @ tau)
        for _ in range(200):
            v = M @ tau
            nv = np.linalg.norm(v)
            if nv == 0:
                break
            g = M.T @ (v / nv)
            for s, e in blocks:
                ng = np.linalg.norm(g[s:e])
                if ng > 0:
                    tau[s:e] = g[s:e] / ng
            new = np.linalg.norm(M @ tau)
            if new <= val * (1 + 1e-12):
                val = max(val, new)
                break
            val = new
        best = max(best, val)
    return best


def gir_check(
    X=None,
    partition: GroupPartition | None = None,
    active_groups=(),
    *,
    sigma=None,
    eps: float = 0.0,
    restarts: int = GIR_RESTARTS,
    seed: int = 0,
    pinv: bool = False,
) -> GirReport:
    """Group irrepresentable check for the active groups ``W``.

    For every noise group ``r`` the value
    ``(1/m_r) ||(Sigma_21 Sigma_11^{-1} K tau)_{G_r}||_2`` with
    ``K = diag(m_l I)`` is maximized over ``tau`` whose active-group blocks
    have Euclidean norm at most one.  The condition is reported to hold
    when all values are below ``1 - eps``.

    Either a standardized design ``X`` or a Gram matrix ``sigma`` is
    accepted.

    Raises
    ------
    SingularGroupGram
        When a within-group Gram block or ``Sigma_11`` is singular and
        ``pinv`` is false.
    """
    if sigma is None:
        if X is None:
            raise ValueError("pass a design X or a Gram matrix sigma")
        sigma = gram(X)
    sigma = _as_sigma(sigma)
    if partition is None:
        partition = GroupPartition.singletons(sigma.shape[0])
    W = sorted({int(r) for r in active_groups})
    if not W:
        raise ValueError("active group set must be nonempty")
    R_W = rw_matrix(sigma, partition, W, pinv=pinv)
    rw_min = float(np.linalg.eigvalsh(R_W)[0])

    act_groups = [np.asarray(partition.groups[r]) for r in W]
    S = np.concatenate(act_groups)
    noise = [r for r in range(partition.q) if r not in set(W)]
    s11 = sigma[np.ix_(S, S)]
    if np.linalg.eigvalsh(s11)[0] <= SINGULAR_TOL:
        if not pinv:
            raise SingularGroupGram("Gram block of the active groups is singular")
        s11_inv = np.linalg.pinv(s11)
    else:
        s11_inv = np.linalg.inv(s11)
    K = np.concatenate([np.full(g.size, g.size, dtype=float) for g in act_groups])
    offs = np.cumsum([0] + [g.size for g in act_groups])
    blocks = list(zip(offs[:-1], offs[1:]))
    rng = np.random.default_rng(seed)
    exact = all(g.size == 1 for g in act_groups)
    values = []
    for r in noise:
        g = np.asarray(partition.groups[r])
        M = (sigma[np.ix_(g, S)] @ s11_inv) * K
        if exact and g.size == 1:
            v = float(np.abs(M).sum())
        else:
            exact = False
            v = _ball_product_max(M, blocks, restarts, rng)
        values.append(v / g.size)
    return GirReport(
        rw_min_eigen=rw_min,
        group_ir_values=values,
        noise_groups=noise,
        holds=all(v < 1.0 - eps for v in values),
        eps=float(eps),
        lower_bound=not exact,
    )


def beta_min_check(beta, S, lam: float, phi2: float):
    """Beta-min test ``min_{j in S} |beta_j| >= 4 lam |S| / phi2``.

    A zero coefficient inside ``S`` always fails.  Returns
    ``(holds, margin)`` with ``margin = min |beta_S| - 4 lam |S| / phi2``.
    """
    if phi2 <= 0:
        raise ValueError("phi2 must be positive")
    S = np.asarray(sorted({int(j) for j in S}), dtype=int)
    if S.size == 0:
        raise ValueError("S must be nonempty")
    smallest = float(np.abs(np.asarray(beta, dtype=float)[S]).min())
    margin = smallest - 4.0 * lam * S.size / phi2
    return bool(smallest > 0 and margin >= 0), margin


def group_beta_min_check(beta, partition: GroupPartition, active_groups, lam: float, n: int, D: float = DEFAULT_D):
    """Group beta-min test ``||beta_{G_r}||_inf >= D lam sqrt(m_r) / n`` for ``r`` in ``W``.

    Returns ``(holds, margins)`` with ``margins[r]`` the left side minus the
    right side.  An all-zero active group always fails.
    """
    if D <= 0:
        raise ValueError("D must be positive")
    beta = np.asarray(beta, dtype=float)
    margins = {}
    ok = True
    for r in sorted({int(r) for r in active_groups}):
        g = list(partition.groups[r])
        top = float(np.abs(beta[g]).max())
        margins[r] = top - D * lam * np.sqrt(len(g)) / n
        ok &= top > 0 and margins[r] >= 0
    return bool(ok), margins


def phi2_proxy(sigma, S) -> float:
    """Smallest eigenvalue of ``Sigma_SS``, a stand-in for the squared compatibility constant."""
    sigma = _as_sigma(sigma)
    S = np.asarray(sorted({int(j) for j in S}), dtype=int)
    return float(np.linalg.eigvalsh(sigma[np.ix_(S, S)])[0])


def lambda0_empirical(X, noise) -> float:
    """``max_j |(2/n) X_j^T eps|``, the noise level the penalty has to dominate."""
    X = np.asarray(X, dtype=float)
    noise = np.asarray(noise, dtype=float)
    return float(np.abs(2.0 / X.shape[0] * (X.T @ noise)).max())


def lasso_oracle_bound(lam: float, s: int, phi2: float) -> float:
    return 4.0 * lam**2 * s / phi2


def lasso_oracle_lhs(X, beta_hat, beta0, lam: float) -> float:
    """``(1/n)||X Delta||^2 + lam ||Delta||_1`` with ``Delta = beta_hat - beta0``."""
    X = np.asarray(X, dtype=float)
    d = np.asarray(beta_hat, dtype=float) - np.asarray(beta0, dtype=float)
    f = X @ d
    return float(f @ f / X.shape[0] + lam * np.abs(d).sum())


def group_oracle_bound(lam: float, active_sizes, phi2: float) -> float:
    return 24.0 * lam**2 * float(np.sum(active_sizes)) / phi2


def group_oracle_lhs(X, beta_hat, beta0, partition: GroupPartition, lam: float) -> float:
    """``(1/n)||X Delta||^2 + lam * sum_r ||Delta_{G_r}||_2``."""
    X = np.asarray(X, dtype=float)
    d = np.asarray(beta_hat, dtype=float) - np.asarray(beta0, dtype=float)
    f = X @ d
    pen = sum(np.linalg.norm(d[list(g)]) for g in partition.groups)
    return float(f @ f / X.shape[0] + lam * pen)
