"""Stage 1: Lasso selection followed by correlation screening."""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .exceptions import EmptyStage1
from .lasso import fit_adaptive_lasso, fit_lasso, threshold_fit

__all__ = ["ScreenResult", "correlation_screen", "stage1", "VARIANTS"]

DEFAULT_RHO = 0.7
VARIANTS = ("plain", "adaptive", "thresholded")


@dataclass
class ScreenResult:
    s_lasso: list
    s_corr: list
    s1: list
    rho: float
    lam: float
    variant: str = "plain"
    n_corr_evals: int = 0
    timings: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def correlation_screen(
    X,
    seed_set,
    rho: float = DEFAULT_RHO,
    *,
    absolute: bool = True,
    transitive: bool = False,
    return_count: bool = False,
):
    """Columns outside ``seed_set`` correlated above ``rho`` with some seed.

    Correlations are entries of ``X^T X / n`` (``X`` standardized).  With
    ``absolute=False`` only positive correlations count.  A single pass is
    made over the seeds unless ``transitive=True``, in which case newly
    added columns seed further passes until nothing changes.

    With ``return_count=True`` the number of pairwise correlations evaluated
    is returned as well; a single pass evaluates ``|seed| * (p - |seed|)``.
    """
    if not 0 < rho < 1:
        raise ValueError("rho must lie in (0, 1)")
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    chosen = np.zeros(p, dtype=bool)
    seeds = np.array(sorted({int(j) for j in seed_set}), dtype=int)
    chosen[seeds] = True
    added = []
    evals = 0
    frontier = seeds
    while frontier.size:
        others = np.flatnonzero(~chosen)
        if others.size == 0:
            break
        C = X[:, frontier].T @ X[:, others] / n
        evals += C.size
        score = np.abs(C) if absolute else C
        hit = others[(score > rho).any(axis=0)]
        chosen[hit] = True
        added.extend(hit.tolist())
        if not transitive:
            break
        frontier = hit
    result = sorted(added)
    return (result, evals) if return_count else result


def stage1(
    X,
    y,
    lam: float,
    rho: float = DEFAULT_RHO,
    variant: str = "plain",
    *,
    initial_beta=None,
    adaptive_lam: float | None = None,
    tau: float | None = None,
    absolute: bool = True,
    transitive: bool = False,
    solver_kwargs: dict | None = None,
) -> ScreenResult:
    """Lasso variant at ``lam`` followed by :func:`correlation_screen`.

    For ``variant="adaptive"`` the plain fit at ``lam`` (or ``initial_beta``)
    supplies the weights and the weighted problem is solved at
    ``adaptive_lam`` (default ``lam``).  For ``variant="thresholded"`` the plain
    fit is hard-thresholded at ``tau`` (default ``lam``).

    Raises
    ------
    EmptyStage1
        When nothing is selected.
    """
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    kw = solver_kwargs or {}
    t0 = time.perf_counter()
    if variant == "adaptive":
        init = initial_beta if initial_beta is not None else fit_lasso(X, y, lam, **kw).beta
        beta = fit_adaptive_lasso(X, y, lam if adaptive_lam is None else adaptive_lam, init, **kw).beta
    else:
        beta = initial_beta if initial_beta is not None else fit_lasso(X, y, lam, **kw).beta
        if variant == "thresholded":
            beta = threshold_fit(beta, lam if tau is None else tau)
    s_lasso = np.flatnonzero(beta).tolist()
    t1 = time.perf_counter()
    s_corr, evals = correlation_screen(
        X, s_lasso, rho, absolute=absolute, transitive=transitive, return_count=True
    )
    t2 = time.perf_counter()
    s1 = sorted(set(s_lasso) | set(s_corr))
    if not s1:
        raise EmptyStage1(lam)
    return ScreenResult(
        s_lasso=s_lasso,
        s_corr=s_corr,
        s1=s1,
        rho=float(rho),
        lam=float(lam),
        variant=variant,
        n_corr_evals=int(evals),
        timings={"lasso": t1 - t0, "screen": t2 - t1},
    )
