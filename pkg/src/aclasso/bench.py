"""Metrics, replicate runner and result tables for simulation studies."""

from __future__ import annotations

import csv
import json
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .exceptions import ACLError, DimensionMismatch, EmptyTruth
from .pipeline import ACLConfig, fit_method
from .simulation import ScenarioConfig, generate

__all__ = [
    "mse",
    "tpr",
    "tpr_curve",
    "curve_envelope",
    "mean_curve",
    "ReplicateRecord",
    "AggregateTable",
    "BenchmarkResult",
    "run_replicate",
    "run_benchmark",
    "aggregate",
    "write_records_csv",
    "write_aggregate_csv",
    "write_curves_csv",
    "write_metadata_json",
    "write_outputs",
    "TIMING_STAGES",
]

TIMING_STAGES = ("screen", "cluster", "fit", "total")


def mse(y, y_hat) -> float:
    """``(1/n) sum (y_i - y_hat_i)^2``."""
    y = np.asarray(y, dtype=float).ravel()
    y_hat = np.asarray(y_hat, dtype=float).ravel()
    if y.shape != y_hat.shape:
        raise DimensionMismatch(f"lengths differ: {y.size} vs {y_hat.size}")
    d = y - y_hat
    return float(d @ d / d.size)


def tpr(s_hat, s0) -> float:
    """``|S_hat & S0| / |S0|``."""
    s0 = {int(j) for j in s0}
    if not s0:
        raise EmptyTruth("true active set is empty")
    return len({int(j) for j in s_hat} & s0) / len(s0)


def _support_of(item):
    if hasattr(item, "support"):
        return item.support
    if hasattr(item, "selected_vars"):
        return item.selected_vars
    return item


def tpr_curve(path, s0) -> list[tuple[int, float]]:
    """``(|S_hat|, tpr)`` points along a path, one per distinct size.

    ``path`` holds fits (anything with ``support``) or plain index sets.  On
    repeated sizes the largest TPR is kept; output is sorted by size.
    """
    best: dict[int, float] = {}
    for item in path:
        s = list(_support_of(item))
        k = len(s)
        best[k] = max(best.get(k, 0.0), tpr(s, s0))
    return sorted(best.items())


def curve_envelope(curve, max_size: int | None = None) -> np.ndarray:
    """Best TPR reached with at most ``k`` selected variables, for ``k = 0..max_size``.

    Entries beyond the largest observed size are ``nan``.
    """
    if not curve:
        return np.full(1 if max_size is None else max_size + 1, np.nan)
    top = max(k for k, _ in curve)
    size = top if max_size is None else max_size
    out = np.full(size + 1, np.nan)
    pts = dict(curve)
    run = np.nan
    for k in range(min(size, top) + 1):
        if k in pts:
            run = pts[k] if np.isnan(run) else max(run, pts[k])
        out[k] = run
    return out


def mean_curve(curves) -> tuple[np.ndarray, np.ndarray]:
    """Mean envelope over replicates on the sizes every replicate reaches.

    Returns ``(sizes, mean_tpr)``.
    """
    curves = [c for c in curves if c]
    if not curves:
        return np.array([], dtype=int), np.array([])
    reach = min(max(k for k, _ in c) for c in curves)
    env = np.vstack([curve_envelope(c, reach) for c in curves])
    ok = ~np.isnan(env).any(axis=0)
    sizes = np.flatnonzero(ok)
    return sizes, env[:, ok].mean(axis=0)


@dataclass
class ReplicateRecord:
    method: str
    scenario: str
    sigma: float
    replicate: int
    mse_val: float = float("nan")
    tpr: float = float("nan")
    s_hat_size: int = 0
    s1_size: int = 0
    timings: dict = field(default_factory=dict)
    lambdas: dict = field(default_factory=dict)
    error: str | None = None
    selected: list = field(default_factory=list, repr=False)
    s_lasso: list = field(default_factory=list, repr=False)
    s1: list = field(default_factory=list, repr=False)
    curve: list = field(default_factory=list, repr=False)

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass
class AggregateTable:
    rows: list

    def row(self, method: str) -> dict:
        for r in self.rows:
            if r["method"] == method:
                return r
        raise KeyError(method)


@dataclass
class BenchmarkResult:
    config: ScenarioConfig
    fit_config: ACLConfig
    methods: tuple
    records: list
    table: AggregateTable

    def records_for(self, method: str) -> list:
        return [r for r in self.records if r.method == method]


def run_replicate(config: ScenarioConfig, replicate: int, methods, fit_config: ACLConfig | None = None) -> list:
    """Generate one dataset and fit every method on it, single-threaded."""
    fit_config = fit_config or ACLConfig()
    with threadpool_limits(limits=1):
        ds = generate(config, replicate)
        out = []
        for m in methods:
            rec = ReplicateRecord(m, config.scenario, config.sigma, replicate)
            try:
                res = fit_method(m, ds.X_train, ds.y_train, ds.X_val, ds.y_val, fit_config)
            except (ACLError, np.linalg.LinAlgError) as exc:
                rec.error = f"{type(exc).__name__}: {exc}"
                out.append(rec)
                continue
            rec.mse_val = res.val_mse
            rec.tpr = tpr(res.selected_vars, ds.s0)
            rec.s_hat_size = len(res.selected_vars)
            rec.s1_size = len(res.s1)
            rec.timings = {k: float(res.timings[k]) for k in TIMING_STAGES}
            rec.lambdas = dict(res.lambdas)
            rec.selected = list(res.selected_vars)
            rec.s_lasso = list(res.s_lasso)
            rec.s1 = list(res.s1)
            rec.curve = tpr_curve(res.path_supports, ds.s0)
            out.append(rec)
    return out


def _job(args):
    return run_replicate(*args)


def run_benchmark(
    config: ScenarioConfig,
    methods=("acgl", "cglcor"),
    *,
    fit_config: ACLConfig | None = None,
    threads: int = 1,
) -> BenchmarkResult:
    """Run every method on every replicate and aggregate.

    Replicates are distributed over ``threads`` worker processes; each
    replicate is seeded from ``(config.seed, replicate)`` alone, so results
    do not depend on scheduling.  Failures are recorded, not raised.
    """
    methods = tuple(methods)
    fit_config = fit_config or ACLConfig()
    jobs = [(config, r, methods, fit_config) for r in range(config.replicates)]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(_job, jobs))
    else:
        chunks = [_job(j) for j in jobs]
    records = [rec for chunk in chunks for rec in chunk]
    return BenchmarkResult(config, fit_config, methods, records, aggregate(records, methods))


def _sd(v):
    return float(np.std(v, ddof=1)) if len(v) > 1 else 0.0


def aggregate(records, methods=None) -> AggregateTable:
    """Per-method mean and sd of validation MSE plus mean TPR, sizes and times."""
    if methods is None:
        methods = list(dict.fromkeys(r.method for r in records))
    rows = []
    for m in methods:
        recs = [r for r in records if r.method == m]
        ok = [r for r in recs if r.ok]
        mses = [r.mse_val for r in ok]
        row = {
            "method": m,
            "scenario": recs[0].scenario if recs else "",
            "sigma": recs[0].sigma if recs else float("nan"),
            "replicates": len(recs),
            "failures": len(recs) - len(ok),
            "mean_mse": float(np.mean(mses)) if ok else float("nan"),
            "sd_mse": _sd(mses) if ok else float("nan"),
            "mean_tpr": float(np.mean([r.tpr for r in ok])) if ok else float("nan"),
            "mean_s_hat_size": float(np.mean([r.s_hat_size for r in ok])) if ok else float("nan"),
            "mean_s1_size": float(np.mean([r.s1_size for r in ok])) if ok else float("nan"),
        }
        for st in TIMING_STAGES:
            row[f"mean_time_{st}"] = float(np.mean([r.timings[st] for r in ok])) if ok else float("nan")
        rows.append(row)
    return AggregateTable(rows)


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


RECORD_FIELDS = [
    "method", "scenario", "sigma", "replicate", "mse_val", "tpr", "s_hat_size", "s1_size",
    "lambda1", "lambda_stage3", "error",
] + [f"time_{s}" for s in TIMING_STAGES]


def write_records_csv(records, path):
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RECORD_FIELDS)
        for r in records:
            w.writerow([_fmt(v) for v in (
                r.method, r.scenario, r.sigma, r.replicate, r.mse_val, r.tpr, r.s_hat_size, r.s1_size,
                r.lambdas.get("lambda1", ""), r.lambdas.get("lambda_stage3", ""), r.error or "",
                *(r.timings.get(s, "") for s in TIMING_STAGES),
            )])


def write_aggregate_csv(table: AggregateTable, path):
    if not table.rows:
        Path(path).write_text("", encoding="utf-8")
        return
    keys = list(table.rows[0])
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(keys)
        for row in table.rows:
            w.writerow([_fmt(row[k]) for k in keys])


def write_curves_csv(records, path, methods=None):
    """Plot-ready mean TPR envelope per method: ``method,s_hat_size,mean_tpr``."""
    if methods is None:
        methods = list(dict.fromkeys(r.method for r in records))
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "s_hat_size", "mean_tpr"])
        for m in methods:
            sizes, means = mean_curve([r.curve for r in records if r.method == m and r.ok])
            for k, v in zip(sizes, means):
                w.writerow([m, int(k), repr(float(v))])


def _versions():
    import numba
    import sklearn

    return {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scikit-learn": sklearn.__version__,
        "numba": numba.__version__,
    }


def write_metadata_json(result: BenchmarkResult, path, extra: dict | None = None):
    meta = {
        "scenario_config": result.config.to_dict(),
        "fit_config": result.fit_config.to_dict(),
        "methods": list(result.methods),
        "mse_reference": "observed validation response",
        "versions": _versions(),
        "failures": [
            {"method": r.method, "replicate": r.replicate, "error": r.error}
            for r in result.records if not r.ok
        ],
    }
    if extra:
        meta.update(extra)
    Path(path).write_text(json.dumps(meta, indent=2, sort_keys=True), encoding="utf-8")


def write_outputs(result: BenchmarkResult, out_dir, extra: dict | None = None) -> dict:
    """Write the four standard artifacts into ``out_dir`` and return their paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "replicates": out / "replicates.csv",
        "aggregate": out / "aggregate.csv",
        "tpr_curves": out / "tpr_curves.csv",
        "metadata": out / "metadata.json",
    }
    write_records_csv(result.records, paths["replicates"])
    write_aggregate_csv(result.table, paths["aggregate"])
    write_curves_csv(result.records, paths["tpr_curves"], result.methods)
    write_metadata_json(result, paths["metadata"], extra)
    return {k: str(v) for k, v in paths.items()}
