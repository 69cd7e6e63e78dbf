"""End-to-end estimators: ACGL, ACRL and the CGLcor / CRLcor baselines.

All methods share one protocol.  The training data are standardized, the
validation data are mapped with the training parameters, and every
penalty level is chosen by the smallest validation mean squared error over
a geometric path (ties go to the larger penalty).  Tuning is sequential:
the stage-1 Lasso penalty is fixed first, then the stage-3 penalty given
the resulting clusters.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils import check_random_state
from sklearn.utils.validation import check_is_fitted, validate_data

from .clustering import DEFAULT_CUT_HEIGHT, cluster_columns, representatives
from .core import standardize
from .exceptions import DimensionMismatch, EmptyPath
from .group_lasso import group_lambda_path, group_lasso_path, orthonormalize_groups
from .lasso import adaptive_weights, lambda_path, lasso_path, threshold_fit
from .screening import DEFAULT_RHO, correlation_screen

__all__ = [
    "ACLConfig",
    "FitResult",
    "select_lambda_by_validation",
    "fit_acgl",
    "fit_acrl",
    "fit_cglcor",
    "fit_crlcor",
    "fit_lasso_cv",
    "fit_method",
    "METHODS",
    "AdaptiveClusterLasso",
]


@dataclass(frozen=True)
class ACLConfig:
    """Tuning knobs shared by all pipeline methods."""

    rho: float = DEFAULT_RHO
    variant: str = "plain"
    adaptive_delta: float = 1e-3
    tau: float | None = None
    absolute_screen: bool = True
    transitive_screen: bool = False
    screen: bool = True
    linkage: str = "average"
    cut_height: float = DEFAULT_CUT_HEIGHT
    n_clusters: int | None = None
    n_lambda: int = 50
    lambda_ratio: float = 1e-3
    lambda1: float | None = None
    lambda_stage3: float | None = None
    tol: float = 1e-7
    group_tol: float = 1e-6
    max_iter: int = 100_000

    @classmethod
    def from_dict(cls, d: dict) -> "ACLConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class FitResult:
    method: str
    beta: np.ndarray
    coef: np.ndarray
    intercept: float
    selected_vars: list
    selected_groups: list
    partition: tuple
    lambdas: dict
    timings: dict
    val_mse: float
    s_lasso: list = field(default_factory=list)
    s_corr: list = field(default_factory=list)
    s1: list = field(default_factory=list)
    path_lambdas: list = field(default_factory=list, repr=False)
    path_supports: list = field(default_factory=list, repr=False)
    path_val_mse: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["beta"] = self.beta.tolist()
        d["coef"] = self.coef.tolist()
        d["partition"] = [list(g) for g in self.partition]
        return d

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, d: dict) -> "FitResult":
        d = dict(d)
        d["beta"] = np.asarray(d["beta"], dtype=float)
        d["coef"] = np.asarray(d["coef"], dtype=float)
        d["partition"] = tuple(tuple(g) for g in d["partition"])
        return cls(**d)


def _val_mse(X_val, y_val, beta, offset):
    r = y_val - offset - X_val @ beta
    return float(r @ r / r.shape[0])


def select_lambda_by_validation(betas, X_val, y_val, offset: float = 0.0):
    """Index of the validation-MSE minimizer along a path and all path MSEs.

    ``betas`` are ordered by decreasing penalty; ``np.argmin`` returns the
    first minimizer, which resolves exact ties toward the larger penalty.
    """
    betas = [getattr(b, "beta", b) for b in betas]
    if not betas:
        raise EmptyPath("cannot select from an empty path")
    X_val = np.asarray(X_val, dtype=float)
    y_val = np.asarray(y_val, dtype=float).ravel()
    mses = np.array([_val_mse(X_val, y_val, b, offset) for b in betas])
    return int(np.argmin(mses)), mses


def _grid(fixed, make_path, cfg):
    if fixed is not None:
        return np.array([float(fixed)])
    return make_path(cfg.n_lambda, cfg.lambda_ratio).values


def _stage1(Xs, ys, Xv, yv_c, cfg, kw):
    """Validation-tuned Lasso variant followed by screening."""
    path = _grid(cfg.lambda1, lambda g, r: lambda_path(Xs, ys, g, r), cfg)
    fits = lasso_path(Xs, ys, path, **kw)
    k, _ = select_lambda_by_validation(fits, Xv, yv_c)
    lam1 = float(path[k])
    beta = fits[k].beta
    lambdas = {"lambda1": lam1}
    if cfg.variant == "adaptive":
        w = adaptive_weights(beta, cfg.adaptive_delta)
        apath = _grid(cfg.lambda1, lambda g, r: lambda_path(Xs, ys, g, r, weights=w), cfg)
        afits = lasso_path(Xs, ys, apath, weights=w, **kw)
        ka, _ = select_lambda_by_validation(afits, Xv, yv_c)
        beta = afits[ka].beta
        lambdas["lambda1_adaptive"] = float(apath[ka])
    elif cfg.variant == "thresholded":
        tau = lam1 if cfg.tau is None else cfg.tau
        beta = threshold_fit(beta, tau)
        lambdas["tau"] = float(tau)
    elif cfg.variant != "plain":
        raise ValueError(f"unknown stage-1 variant {cfg.variant!r}")
    s_lasso = np.flatnonzero(beta).tolist()
    s_corr, evals = correlation_screen(
        Xs, s_lasso, cfg.rho, absolute=cfg.absolute_screen,
        transitive=cfg.transitive_screen, return_count=True,
    )
    return s_lasso, s_corr, lambdas


def _prepare(X, y, X_val, y_val):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    X_val = np.asarray(X_val, dtype=float)
    y_val = np.asarray(y_val, dtype=float).ravel()
    if X.shape[0] != y.shape[0] or X_val.shape[0] != y_val.shape[0] or X.shape[1] != X_val.shape[1]:
        raise DimensionMismatch("training and validation shapes are inconsistent")
    Xs, ys, scaling = standardize(X, y)
    Xs = np.asfortranarray(Xs.values)
    Xv = np.asfortranarray(scaling.transform(X_val))
    return Xs, ys.values, Xv, y_val - scaling.y_mean, scaling


def _fit_clustered(method, X, y, X_val, y_val, cfg: ACLConfig, stage3: str) -> FitResult:
    from .exceptions import EmptyStage1

    t_start = time.perf_counter()
    Xs, ys, Xv, yv_c, scaling = _prepare(X, y, X_val, y_val)
    n, p = Xs.shape
    kw = {"tol": cfg.tol, "max_iter": cfg.max_iter}
    lambdas: dict = {}

    t0 = time.perf_counter()
    if cfg.screen:
        s_lasso, s_corr, lambdas = _stage1(Xs, ys, Xv, yv_c, cfg, kw)
        s1 = sorted(set(s_lasso) | set(s_corr))
        if not s1:
            raise EmptyStage1(lambdas.get("lambda1"))
    else:
        s_lasso, s_corr, s1 = [], [], list(range(p))
    t1 = time.perf_counter()

    idx = np.asarray(s1, dtype=int)
    X_red, Xv_red = Xs[:, idx], Xv[:, idx]
    local, _ = cluster_columns(X_red, linkage=cfg.linkage, height=cfg.cut_height, count=cfg.n_clusters)
    t2 = time.perf_counter()

    if stage3 == "group":
        Z, basis = orthonormalize_groups(X_red, local, warn=False)
        path = _grid(cfg.lambda_stage3, lambda g, r: group_lambda_path(X_red, ys, local, g, r, Z=Z, basis=basis), cfg)
        fits = group_lasso_path(None, ys, local, path, Z=Z, basis=basis, tol=cfg.group_tol, max_iter=cfg.max_iter)
        betas_red = [f.beta for f in fits]
        sel_path = [f.selected_groups.tolist() for f in fits]
    else:
        reps = representatives(X_red, local)
        path = _grid(cfg.lambda_stage3, lambda g, r: lambda_path(reps.values, ys, g, r), cfg)
        fits = lasso_path(reps.values, ys, path, **kw)
        betas_red = [reps.coef_to_columns(f.beta) for f in fits]
        sel_path = [np.flatnonzero(f.beta).tolist() for f in fits]
    k, mses = select_lambda_by_validation(betas_red, Xv_red, yv_c)
    t3 = time.perf_counter()

    beta = np.zeros(p)
    beta[idx] = betas_red[k]
    groups_global = local.mapped(idx)
    selected_groups = sel_path[k]
    selected_vars = sorted(j for r in selected_groups for j in groups_global[r])
    path_supports = [sorted(j for r in sel for j in groups_global[r]) for sel in sel_path]
    lambdas["lambda_stage3"] = float(path[k])
    coef, intercept = scaling.coef_to_original(beta)
    return FitResult(
        method=method,
        beta=beta,
        coef=coef,
        intercept=intercept,
        selected_vars=selected_vars,
        selected_groups=list(selected_groups),
        partition=groups_global,
        lambdas=lambdas,
        timings={
            "screen": t1 - t0,
            "cluster": t2 - t1,
            "fit": t3 - t2,
            "total": t3 - t_start,
        },
        val_mse=float(mses[k]),
        s_lasso=s_lasso,
        s_corr=s_corr,
        s1=s1,
        path_lambdas=[float(v) for v in path],
        path_supports=path_supports,
        path_val_mse=mses.tolist(),
    )


def fit_acgl(X, y, X_val, y_val, config: ACLConfig | None = None) -> FitResult:
    """Screening, clustering of the screened columns, then group Lasso."""
    return _fit_clustered("acgl", X, y, X_val, y_val, config or ACLConfig(), "group")


def fit_acrl(X, y, X_val, y_val, config: ACLConfig | None = None) -> FitResult:
    """Screening, clustering, then Lasso on cluster representatives."""
    return _fit_clustered("acrl", X, y, X_val, y_val, config or ACLConfig(), "representative")


def fit_cglcor(X, y, X_val, y_val, config: ACLConfig | None = None) -> FitResult:
    """Cluster all columns, then group Lasso."""
    cfg = replace(config or ACLConfig(), screen=False)
    return _fit_clustered("cglcor", X, y, X_val, y_val, cfg, "group")


def fit_crlcor(X, y, X_val, y_val, config: ACLConfig | None = None) -> FitResult:
    """Cluster all columns, then Lasso on cluster representatives."""
    cfg = replace(config or ACLConfig(), screen=False)
    return _fit_clustered("crlcor", X, y, X_val, y_val, cfg, "representative")


def fit_lasso_cv(X, y, X_val, y_val, config: ACLConfig | None = None) -> FitResult:
    """Plain Lasso tuned on the validation set (reference method)."""
    cfg = config or ACLConfig()
    t0 = time.perf_counter()
    Xs, ys, Xv, yv_c, scaling = _prepare(X, y, X_val, y_val)
    p = Xs.shape[1]
    path = _grid(cfg.lambda1, lambda g, r: lambda_path(Xs, ys, g, r), cfg)
    fits = lasso_path(Xs, ys, path, tol=cfg.tol, max_iter=cfg.max_iter)
    k, mses = select_lambda_by_validation(fits, Xv, yv_c)
    t1 = time.perf_counter()
    beta = fits[k].beta
    sel = np.flatnonzero(beta).tolist()
    coef, intercept = scaling.coef_to_original(beta)
    return FitResult(
        method="lasso",
        beta=beta,
        coef=coef,
        intercept=intercept,
        selected_vars=sel,
        selected_groups=sel,
        partition=tuple((j,) for j in range(p)),
        lambdas={"lambda1": float(path[k])},
        timings={"screen": 0.0, "cluster": 0.0, "fit": t1 - t0, "total": t1 - t0},
        val_mse=float(mses[k]),
        s_lasso=sel,
        s1=sel,
        path_lambdas=[float(v) for v in path],
        path_supports=[np.flatnonzero(f.beta).tolist() for f in fits],
        path_val_mse=mses.tolist(),
    )


METHODS = {
    "acgl": fit_acgl,
    "acrl": fit_acrl,
    "cglcor": fit_cglcor,
    "crlcor": fit_crlcor,
    "lasso": fit_lasso_cv,
}


def fit_method(method: str, X, y, X_val, y_val, config: ACLConfig | None = None) -> FitResult:
    try:
        fn = METHODS[method]
    except KeyError:
        raise ValueError(f"unknown method {method!r}; choose from {sorted(METHODS)}") from None
    return fn(X, y, X_val, y_val, config)


class AdaptiveClusterLasso(BaseEstimator, RegressorMixin):
    """Scikit-learn style front end to the pipeline methods.

    ``fit`` accepts an explicit validation set; without one, a random
    ``val_fraction`` of the rows is held out for tuning.

    Parameters
    ----------
    method : {"acgl", "acrl", "cglcor", "crlcor", "lasso"}
    rho : float
        Screening threshold on absolute correlation.
    variant : {"plain", "adaptive", "thresholded"}
        Stage-1 Lasso flavour.
    linkage, cut_height :
        Clustering settings.
    n_lambda, lambda_ratio :
        Penalty grid used for every tuned stage.
    val_fraction : float
    random_state : int, RandomState or None
    """

    def __init__(
        self,
        method="acgl",
        rho=DEFAULT_RHO,
        variant="plain",
        linkage="average",
        cut_height=DEFAULT_CUT_HEIGHT,
        n_lambda=50,
        lambda_ratio=1e-3,
        val_fraction=0.3,
        random_state=None,
    ):
        self.method = method
        self.rho = rho
        self.variant = variant
        self.linkage = linkage
        self.cut_height = cut_height
        self.n_lambda = n_lambda
        self.lambda_ratio = lambda_ratio
        self.val_fraction = val_fraction
        self.random_state = random_state

    def _config(self):
        return ACLConfig(
            rho=self.rho,
            variant=self.variant,
            linkage=self.linkage,
            cut_height=self.cut_height,
            n_lambda=self.n_lambda,
            lambda_ratio=self.lambda_ratio,
        )

    def fit(self, X, y, X_val=None, y_val=None):
        X, y = validate_data(self, X, y, y_numeric=True)
        if (X_val is None) != (y_val is None):
            raise ValueError("pass both X_val and y_val or neither")
        if X_val is None:
            rng = check_random_state(self.random_state)
            n = X.shape[0]
            n_val = int(round(self.val_fraction * n))
            if not 2 <= n_val <= n - 2:
                raise ValueError("val_fraction leaves too few rows for training or validation")
            perm = rng.permutation(n)
            val, train = np.sort(perm[:n_val]), np.sort(perm[n_val:])
            X, y, X_val, y_val = X[train], y[train], X[val], y[val]
        self.result_ = fit_method(self.method, X, y, X_val, y_val, self._config())
        self.coef_ = self.result_.coef
        self.intercept_ = self.result_.intercept
        self.selected_ = np.asarray(self.result_.selected_vars, dtype=int)
        # global column ids; screened methods cover only the screened columns
        self.partition_ = self.result_.partition
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = validate_data(self, X, reset=False)
        return X @ self.coef_ + self.intercept_
