"""Synthetic designs, coefficient configurations and seeded data generation.

Three covariance designs are provided: many equicorrelated blocks
(``sigma1``), one correlated block among independent columns
(``sigma2``) and many 2x2 blocks (``sigma3``).  Coefficient configurations
follow the E-series ids (``e1.1`` .. ``e1.4``, ``e2.1`` .. ``e2.4``, ``e3``).
Indices are 0-based throughout, so the active set ``{1, ..., 20}`` of the
E1.1 design is ``range(20)`` here.

All randomness is derived from a master seed through
:class:`numpy.random.SeedSequence` with spawn key
``(replicate, role)``, so any replicate can be regenerated on its own.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .exceptions import IncompatibleConfig, NotPSD, TooFewColumns
from .group_lasso import GroupPartition

__all__ = [
    "SCENARIOS",
    "DESIGNS",
    "ScenarioConfig",
    "GeneratedDataset",
    "make_sigma1",
    "make_sigma2",
    "make_sigma3",
    "make_beta",
    "e3_small_coefficient",
    "sample_gaussian",
    "replicate_rng",
    "generate",
    "pseudo_real",
    "write_dataset",
]

DESIGNS = ("sigma1", "sigma2", "sigma3", "pseudo_real")

# scenario id -> covariance design
SCENARIOS = {
    "e1.1": "sigma1",
    "e1.2": "sigma1",
    "e1.3": "sigma1",
    "e1.4": "sigma1",
    "e2.1": "sigma2",
    "e2.2": "sigma2",
    "e2.3": "sigma2",
    "e2.4": "sigma2",
    "e3": "sigma3",
    "pseudo_real": "pseudo_real",
}

DEFAULT_BLOCK_SIZE = {"sigma1": 10, "sigma2": 30, "sigma3": 2}

_ROLES = {"train": 0, "val": 1, "beta": 2, "pick": 3}

# the coefficient grid {.1, .2, ..., 2}
COEF_GRID = np.round(np.arange(1, 21) / 10.0, 10)


def _equicorr(m, rho):
    T = np.full((m, m), float(rho))
    np.fill_diagonal(T, 1.0)
    return T


def _block_diag(num_blocks, block_size, rho):
    if not 0 < rho < 1:
        raise ValueError("rho must lie in (0, 1)")
    p = num_blocks * block_size
    S = np.zeros((p, p))
    T = _equicorr(block_size, rho)
    for b in range(num_blocks):
        s = b * block_size
        S[s : s + block_size, s : s + block_size] = T
    return S


def make_sigma1(num_blocks: int = 100, block_size: int = 10, rho: float = 0.9) -> np.ndarray:
    """Block diagonal covariance of ``num_blocks`` equicorrelated blocks."""
    return _block_diag(num_blocks, block_size, rho)


def make_sigma2(p: int = 1000, block_size: int = 30, rho: float = 0.9) -> np.ndarray:
    """One equicorrelated block on the first ``block_size`` columns, identity elsewhere."""
    if not 0 < rho < 1:
        raise ValueError("rho must lie in (0, 1)")
    if not 1 <= block_size <= p:
        raise ValueError("block_size must lie in [1, p]")
    S = np.eye(p)
    S[:block_size, :block_size] = _equicorr(block_size, rho)
    return S


def make_sigma3(num_blocks: int = 500, rho: float = 0.9) -> np.ndarray:
    """Block diagonal covariance of 2x2 equicorrelated blocks."""
    return _block_diag(num_blocks, 2, rho)


def true_blocks(design: str, p: int, block_size: int) -> GroupPartition:
    """Ground-truth block partition of a design (independent columns as singletons)."""
    if design in ("sigma1", "sigma3"):
        if p % block_size:
            raise IncompatibleConfig(f"p={p} is not a multiple of block size {block_size}")
        return GroupPartition.from_labels(np.arange(p) // block_size)
    if design == "sigma2":
        labels = np.arange(p)
        labels[:block_size] = 0
        return GroupPartition.from_labels(labels)
    return GroupPartition.singletons(p)


def e3_small_coefficient(p: int, n: int, sigma: float) -> float:
    """``((1/3) * sqrt(ln p / n) * sigma) / 1.9``."""
    return (np.sqrt(np.log(p) / n) * sigma / 3.0) / 1.9


def _active_set(beta_id, p, block_size):
    if beta_id in ("e1.1", "e1.3"):
        s0 = np.arange(20)
    elif beta_id in ("e1.2", "e1.4"):
        s0 = np.array([b * block_size + k for b in range(10) for k in (0, 1)])
    elif beta_id in ("e2.1", "e2.3"):
        s0 = np.r_[np.arange(15), np.arange(30, 35)]
    elif beta_id in ("e2.2", "e2.4"):
        s0 = np.r_[np.arange(5), np.arange(30, 45)]
    elif beta_id == "e3":
        s0 = np.arange(20)
    else:
        raise IncompatibleConfig(f"unknown coefficient configuration {beta_id!r}")
    if s0.max() >= p:
        raise IncompatibleConfig(f"configuration {beta_id} needs p > {s0.max()}, got p={p}")
    return s0


def make_beta(beta_id: str, p: int, sigma: float = 0.0, n: int = 100, seed=None, *, block_size: int = 10):
    """Coefficient vector and active set for an E-series configuration.

    ``seed`` may be an int, a :class:`numpy.random.SeedSequence` or a
    :class:`numpy.random.Generator`.  The ``e3`` vector is deterministic;
    ``sigma`` and ``n`` are only used by ``e3``.

    Returns
    -------
    beta : ndarray of shape (p,)
    s0 : ndarray of int
        Sorted 0-based active set.
    """
    s0 = _active_set(beta_id, p, block_size)
    beta = np.zeros(p)
    if beta_id == "e3":
        small = e3_small_coefficient(p, n, sigma)
        # 1-based odd indices are the even 0-based ones
        beta[s0] = np.where(s0 % 2 == 0, 2.0, small)
        return beta, s0
    rng = np.random.default_rng(seed)
    beta[s0] = rng.choice(COEF_GRID, size=s0.size, replace=False)
    if beta_id in ("e1.3", "e1.4", "e2.3", "e2.4"):
        flip = rng.choice(s0, size=s0.size // 2, replace=False)
        beta[flip] = -beta[flip]
    return beta, s0


def _factor(sigma):
    sigma = np.asarray(sigma, dtype=float)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
        raise ValueError("covariance must be square")
    if not np.allclose(sigma, sigma.T, atol=1e-12):
        raise NotPSD("covariance is not symmetric")
    try:
        return np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        w, V = np.linalg.eigh(sigma)
        if w.min() < -1e-8:
            raise NotPSD(f"covariance has eigenvalue {w.min():.3g} < 0") from None
        return V * np.sqrt(np.clip(w, 0.0, None))


def sample_gaussian(sigma, n: int, seed=None) -> np.ndarray:
    """``n`` i.i.d. rows from ``N(0, sigma)`` via a Cholesky factor.

    Positive semidefinite but singular matrices fall back to an eigen
    factorization.

    Raises
    ------
    NotPSD
    """
    L = _factor(sigma)
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((n, L.shape[0]))
    return Z @ L.T


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed to regenerate a synthetic experiment.

    ``p`` and ``block_size`` default to the full-size designs (1000
    columns).  For ``sigma1`` the number of blocks is ``p // block_size``.
    """

    scenario: str = "e1.1"
    p: int = 1000
    n_train: int = 100
    n_val: int = 100
    rho: float = 0.9
    sigma: float = 3.0
    replicates: int = 20
    seed: int = 0
    block_size: int | None = None
    x_path: str | None = None
    top_k: int = 1000
    s0_size: int = 10

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise IncompatibleConfig(
                f"unknown scenario {self.scenario!r}; valid ids: {', '.join(SCENARIOS)}"
            )
        if min(self.p, self.n_train, self.n_val, self.replicates) < 1:
            raise IncompatibleConfig("sizes and replicate count must be positive")
        if not 0 < self.rho < 1:
            raise IncompatibleConfig("rho must lie in (0, 1)")
        if self.sigma < 0:
            raise IncompatibleConfig("sigma must be nonnegative")
        if self.design == "pseudo_real" and self.x_path is None:
            raise IncompatibleConfig("the pseudo_real scenario needs x_path")
        if self.design == "sigma3" and self.block_size not in (None, 2):
            raise IncompatibleConfig("sigma3 uses 2x2 blocks")
        if self.design != "pseudo_real":
            _active_set(self.scenario, self.p, self.resolved_block_size)

    @property
    def design(self) -> str:
        return SCENARIOS[self.scenario]

    @property
    def resolved_block_size(self) -> int:
        if self.block_size is not None:
            return self.block_size
        return DEFAULT_BLOCK_SIZE.get(self.design, 1)

    def covariance(self) -> np.ndarray:
        b = self.resolved_block_size
        if self.design == "sigma1":
            if self.p % b:
                raise IncompatibleConfig(f"p={self.p} is not a multiple of block size {b}")
            return make_sigma1(self.p // b, b, self.rho)
        if self.design == "sigma2":
            return make_sigma2(self.p, b, self.rho)
        if self.design == "sigma3":
            if self.p % 2:
                raise IncompatibleConfig("sigma3 needs an even p")
            return make_sigma3(self.p // 2, self.rho)
        raise IncompatibleConfig("pseudo_real has no fixed covariance")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["design"] = self.design
        d["block_size"] = self.resolved_block_size
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        d = {k: v for k, v in d.items() if k != "design"}
        return cls(**d)

    def with_(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)


@dataclass
class GeneratedDataset:
    X_train: np.ndarray
    y_train: np.ndarray
    X_val: np.ndarray
    y_val: np.ndarray
    beta: np.ndarray
    s0: np.ndarray
    blocks: GroupPartition
    seed: tuple
    meta: dict = field(default_factory=dict)


def replicate_rng(master_seed: int, replicate: int, role: str) -> np.random.Generator:
    """Independent generator for one (replicate, role) pair."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(replicate), _ROLES[role]))
    return np.random.default_rng(ss)


_FACTOR_CACHE: dict = {}


def _cached_factor(config: ScenarioConfig):
    key = (config.design, config.p, config.resolved_block_size, config.rho)
    if key not in _FACTOR_CACHE:
        _FACTOR_CACHE.clear()
        _FACTOR_CACHE[key] = _factor(config.covariance())
    return _FACTOR_CACHE[key]


def generate(config: ScenarioConfig, replicate: int = 0) -> GeneratedDataset:
    """Training and validation data for one replicate.

    Design rows, noise and the random coefficient draw each use their own
    stream, so changing ``sigma`` leaves ``X`` and ``beta`` untouched.
    """
    if config.design == "pseudo_real":
        from .core import read_csv_matrix

        X, _ = read_csv_matrix(config.x_path)
        return pseudo_real(
            np.asarray(X), top_k=config.top_k, s0_size=config.s0_size, sigma=config.sigma,
            seed=config.seed, replicate=replicate,
        )
    L = _cached_factor(config)
    p = config.p
    r_train = replicate_rng(config.seed, replicate, "train")
    r_val = replicate_rng(config.seed, replicate, "val")
    X_train = r_train.standard_normal((config.n_train, p)) @ L.T
    X_val = r_val.standard_normal((config.n_val, p)) @ L.T
    beta, s0 = make_beta(
        config.scenario, p, config.sigma, config.n_train,
        replicate_rng(config.seed, replicate, "beta"), block_size=config.resolved_block_size,
    )
    y_train = X_train @ beta + config.sigma * r_train.standard_normal(config.n_train)
    y_val = X_val @ beta + config.sigma * r_val.standard_normal(config.n_val)
    return GeneratedDataset(
        X_train=X_train,
        y_train=y_train,
        X_val=X_val,
        y_val=y_val,
        beta=beta,
        s0=s0,
        blocks=true_blocks(config.design, p, config.resolved_block_size),
        seed=(config.seed, replicate),
        meta={"scenario": config.scenario, "config": config.to_dict()},
    )


def pseudo_real(
    X,
    top_k: int = 1000,
    s0_size: int = 10,
    sigma: float = 3.0,
    seed: int = 0,
    replicate: int = 0,
) -> GeneratedDataset:
    """Synthetic response on a user-supplied design.

    The ``top_k`` columns with the largest empirical variance are kept (in
    their original order).  A random column ``k`` and its ``s0_size - 1``
    most correlated partners (absolute correlation) form the active set,
    each with coefficient 1.  Training and validation responses share the
    design and use independent noise.

    Raises
    ------
    TooFewColumns
    """
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    if p < top_k:
        raise TooFewColumns(f"design has {p} columns, top_k={top_k} requested")
    if s0_size > top_k:
        raise TooFewColumns("active set larger than the retained columns")
    var = X.var(axis=0)
    keep = np.sort(np.argsort(-var, kind="stable")[:top_k])
    Xk = X[:, keep]
    rng = replicate_rng(seed, replicate, "pick")
    k = int(rng.integers(top_k))
    Xc = Xk - Xk.mean(axis=0)
    sd = np.sqrt((Xc**2).mean(axis=0))
    corr = np.abs(Xc.T @ Xc[:, k]) / (n * sd * sd[k])
    corr[k] = np.inf
    s0 = np.sort(np.argsort(-corr, kind="stable")[:s0_size])
    beta = np.zeros(top_k)
    beta[s0] = 1.0
    signal = Xk @ beta
    y_train = signal + sigma * replicate_rng(seed, replicate, "train").standard_normal(n)
    y_val = signal + sigma * replicate_rng(seed, replicate, "val").standard_normal(n)
    return GeneratedDataset(
        X_train=Xk,
        y_train=y_train,
        X_val=Xk.copy(),
        y_val=y_val,
        beta=beta,
        s0=s0,
        blocks=GroupPartition.singletons(top_k),
        seed=(seed, replicate),
        meta={"scenario": "pseudo_real", "kept_columns": keep.tolist(), "seed_column": k},
    )


def _write_matrix(path, A, header):
    np.savetxt(path, np.atleast_2d(A), delimiter=",", header=",".join(header), comments="", fmt="%.17g")


def write_dataset(ds: GeneratedDataset, out_dir) -> dict:
    """Write ``X_train.csv``, ``y_train.csv``, ``X_val.csv``, ``y_val.csv`` and ``truth.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    p = ds.X_train.shape[1]
    cols = [f"x{j}" for j in range(p)]
    paths = {
        "X_train": out / "X_train.csv",
        "y_train": out / "y_train.csv",
        "X_val": out / "X_val.csv",
        "y_val": out / "y_val.csv",
        "truth": out / "truth.json",
    }
    _write_matrix(paths["X_train"], ds.X_train, cols)
    _write_matrix(paths["X_val"], ds.X_val, cols)
    _write_matrix(paths["y_train"], ds.y_train[:, None], ["y"])
    _write_matrix(paths["y_val"], ds.y_val[:, None], ["y"])
    truth = {
        "beta": ds.beta.tolist(),
        "s0": ds.s0.tolist(),
        "blocks": [list(g) for g in ds.blocks.groups],
        "seed": list(ds.seed),
        "meta": ds.meta,
    }
    paths["truth"].write_text(json.dumps(truth, indent=2, sort_keys=True), encoding="utf-8")
    return {k: str(v) for k, v in paths.items()}
