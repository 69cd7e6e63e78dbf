"""Command-line interface: ``aclasso {simulate,fit,cluster,diagnose,report}``.

Settings are resolved in three layers: built-in defaults, then a flat JSON
file given with ``--config``, then explicit flags.  The resolved settings
are written into every JSON artifact.  Exit codes: 0 success, 2 usage or
configuration error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from .exceptions import ACLError, EmptyStage1, IncompatibleConfig, SingularGroupGram, SingularSigma11

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

DEFAULTS = {
    "scenario": "e1.1",
    "sigma": 3.0,
    "replicates": 20,
    "seed": None,
    "p": 1000,
    "n_train": 100,
    "n_val": 100,
    "design_rho": 0.9,
    "methods": ["acgl", "cglcor"],
    "method": "acgl",
    "rho": 0.7,
    "variant": "plain",
    "cut_height": 0.5,
    "n_clusters": None,
    "linkage": "average",
    "lambda_grid": 50,
    "lambda_ratio": 1e-3,
    "threads": os.cpu_count() or 1,
    "val_fraction": 0.3,
    "x": None,
    "y": None,
    "x_val": None,
    "y_val": None,
    "response": None,
    "out": None,
    "set": None,
    "groups": None,
    "active_groups": None,
    "input": None,
}


class ConfigError(Exception):
    pass


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aclasso", description="Adaptive cluster Lasso toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="flat JSON file with default settings")
        p.add_argument("--out", help="output directory")
        return p

    def tuning(p):
        p.add_argument("--rho", type=float, help="screening threshold on |corr|")
        p.add_argument("--variant", choices=["plain", "adaptive", "thresholded"])
        p.add_argument("--cut-height", type=float)
        p.add_argument("--n-clusters", type=int)
        p.add_argument("--linkage", choices=["average", "complete"])
        p.add_argument("--lambda-grid", type=int)
        p.add_argument("--lambda-ratio", type=float)

    s = common(sub.add_parser("simulate", help="run a simulation study"))
    s.add_argument("--scenario")
    s.add_argument("--sigma", type=float)
    s.add_argument("--replicates", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--p", type=int)
    s.add_argument("--n-train", type=int)
    s.add_argument("--n-val", type=int)
    s.add_argument("--design-rho", type=float, help="within-block correlation of the design")
    s.add_argument("--method", dest="methods", action="append", help="repeatable; default acgl and cglcor")
    s.add_argument("--threads", type=int)
    s.add_argument("--x", help="design CSV for the pseudo_real scenario")
    tuning(s)

    f = common(sub.add_parser("fit", help="fit one method to CSV data"))
    f.add_argument("--x")
    f.add_argument("--y", help="single-column response CSV")
    f.add_argument("--response", help="response column inside the --x CSV")
    f.add_argument("--x-val")
    f.add_argument("--y-val")
    f.add_argument("--method")
    f.add_argument("--val-fraction", type=float)
    f.add_argument("--seed", type=int)
    tuning(f)

    c = common(sub.add_parser("cluster", help="cluster the columns of a CSV design"))
    c.add_argument("--x")
    c.add_argument("--cut-height", type=float)
    c.add_argument("--n-clusters", type=int)
    c.add_argument("--linkage", choices=["average", "complete"])

    d = common(sub.add_parser("diagnose", help="irrepresentable-condition diagnostics"))
    d.add_argument("--x")
    d.add_argument("--set", help="JSON list of 0-based active column indices")
    d.add_argument("--groups", help="partition CSV (column_id,cluster_id) for the group check")
    d.add_argument("--active-groups", help="JSON list of active group ids")
    d.add_argument("--seed", type=int)

    r = common(sub.add_parser("report", help="summarize a simulate output directory"))
    r.add_argument("--input", help="directory written by simulate")
    return parser


def _resolve(args) -> dict:
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.is_file():
            raise ConfigError(f"config file {path} not found")
        try:
            file_cfg = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path}: {exc}") from None
        if not isinstance(file_cfg, dict):
            raise ConfigError("config file must hold a flat JSON object")
        unknown = set(file_cfg) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(file_cfg)
    for k, v in vars(args).items():
        if k in ("config", "command") or v is None:
            continue
        cfg[k] = v
    cfg["command"] = args.command
    return cfg


def _fit_config(cfg):
    from .pipeline import ACLConfig

    try:
        return ACLConfig(
            rho=float(cfg["rho"]),
            variant=cfg["variant"],
            linkage=cfg["linkage"],
            cut_height=float(cfg["cut_height"]),
            n_clusters=cfg["n_clusters"],
            n_lambda=int(cfg["lambda_grid"]),
            lambda_ratio=float(cfg["lambda_ratio"]),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def _check_tuning(cfg):
    if not 0 < cfg["rho"] < 1:
        raise ConfigError("--rho must lie in (0, 1)")
    if cfg["lambda_grid"] < 2:
        raise ConfigError("--lambda-grid must be at least 2")
    if not 0 < cfg["lambda_ratio"] < 1:
        raise ConfigError("--lambda-ratio must lie in (0, 1)")
    if cfg["n_clusters"] is not None and cfg["n_clusters"] < 1:
        raise ConfigError("--n-clusters must be positive")


def _require_out(cfg) -> Path:
    if not cfg["out"]:
        raise ConfigError("--out is required")
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _require_file(cfg, key, flag):
    if not cfg[key]:
        raise ConfigError(f"{flag} is required")
    p = Path(cfg[key])
    if not p.is_file():
        raise ConfigError(f"{flag}: file {p} not found")
    return p


def _read_matrix(path, response=None):
    from .core import read_csv_matrix

    try:
        X, y = read_csv_matrix(path, response_column=response)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return X, y


def _read_vector(path):
    X, _ = _read_matrix(path)
    if X.p != 1:
        raise ConfigError(f"{path}: expected a single response column, got {X.p}")
    return np.asarray(X)[:, 0]


def cmd_simulate(cfg) -> int:
    from .bench import run_benchmark, write_outputs
    from .simulation import ScenarioConfig

    if cfg["seed"] is None:
        raise ConfigError("simulate requires --seed")
    _check_tuning(cfg)
    out = _require_out(cfg)
    if cfg["x"] is not None:
        _require_file(cfg, "x", "--x")
    try:
        scen = ScenarioConfig(
            scenario=cfg["scenario"],
            p=int(cfg["p"]),
            n_train=int(cfg["n_train"]),
            n_val=int(cfg["n_val"]),
            rho=float(cfg["design_rho"]),
            sigma=float(cfg["sigma"]),
            replicates=int(cfg["replicates"]),
            seed=int(cfg["seed"]),
            x_path=cfg["x"],
        )
    except IncompatibleConfig as exc:
        raise ConfigError(str(exc)) from None
    from .pipeline import METHODS

    bad = [m for m in cfg["methods"] if m not in METHODS]
    if bad:
        raise ConfigError(f"unknown method(s) {bad}; valid ids: {', '.join(METHODS)}")
    if cfg["threads"] < 1:
        raise ConfigError("--threads must be positive")
    result = run_benchmark(scen, cfg["methods"], fit_config=_fit_config(cfg), threads=int(cfg["threads"]))
    # thread count and output location do not affect results; leaving them out
    # keeps reruns byte-identical
    resolved = {k: v for k, v in cfg.items() if k not in ("threads", "out")}
    paths = write_outputs(result, out, extra={"run_config": resolved})
    failures = sum(not r.ok for r in result.records)
    for row in result.table.rows:
        print(
            f"{row['method']:>7}  mse {row['mean_mse']:.4g} (sd {row['sd_mse']:.3g})  "
            f"tpr {row['mean_tpr']:.3f}  |S| {row['mean_s_hat_size']:.1f}  "
            f"time {row['mean_time_total']:.3g}s  failures {row['failures']}"
        )
    for p in paths.values():
        print(p)
    if failures == len(result.records):
        print("error: every replicate failed; outputs are partial", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_fit(cfg) -> int:
    from .pipeline import METHODS, fit_method

    _check_tuning(cfg)
    if cfg["method"] not in METHODS:
        raise ConfigError(f"unknown method {cfg['method']!r}; valid ids: {', '.join(METHODS)}")
    xp = _require_file(cfg, "x", "--x")
    X, y = _read_matrix(xp, cfg["response"])
    if y is None:
        y = _read_vector(_require_file(cfg, "y", "--y"))
    X = np.asarray(X)
    if y.shape[0] != X.shape[0]:
        raise ConfigError(f"--x has {X.shape[0]} rows but the response has {y.shape[0]}")
    if cfg["x_val"] or cfg["y_val"]:
        Xv, yv = _read_matrix(_require_file(cfg, "x_val", "--x-val"), cfg["response"])
        if yv is None:
            yv = _read_vector(_require_file(cfg, "y_val", "--y-val"))
        Xt, yt, Xv = X, y, np.asarray(Xv)
    else:
        frac = float(cfg["val_fraction"])
        if not 0 < frac < 1:
            raise ConfigError("--val-fraction must lie in (0, 1)")
        seed = 0 if cfg["seed"] is None else int(cfg["seed"])
        cfg["seed"] = seed
        n = X.shape[0]
        n_val = int(round(frac * n))
        if not 2 <= n_val <= n - 2:
            raise ConfigError("--val-fraction leaves too few rows")
        perm = np.random.default_rng(seed).permutation(n)
        val, train = np.sort(perm[:n_val]), np.sort(perm[n_val:])
        Xt, yt, Xv, yv = X[train], y[train], X[val], y[val]
    out = _require_out(cfg)
    try:
        res = fit_method(cfg["method"], Xt, yt, Xv, yv, _fit_config(cfg))
    except EmptyStage1 as exc:
        print(f"error: {exc} (e.g. --lambda-ratio smaller or a plain stage-1 variant)", file=sys.stderr)
        return EXIT_RUNTIME
    payload = {"run_config": cfg, "result": res.to_dict()}
    (out / "fit.json").write_text(json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8")
    _, header_x = _read_header(xp, cfg["response"])
    with (out / "selected.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "column_id", "coef"])
        for j in res.selected_vars:
            w.writerow([j, header_x[j], repr(float(res.coef[j]))])
    print(f"selected {len(res.selected_vars)} variables; validation MSE {res.val_mse:.6g}")
    return EXIT_OK


def _read_header(path, response):
    with Path(path).open(newline="", encoding="utf-8") as fh:
        header = next(csv.reader(fh))
    if response is not None:
        header = [h for h in header if h != response]
    return len(header), header


def cmd_cluster(cfg) -> int:
    from .clustering import cluster_columns, write_partition_csv
    from .core import standardize

    xp = _require_file(cfg, "x", "--x")
    X, _ = _read_matrix(xp)
    out = _require_out(cfg)
    n_clusters = cfg["n_clusters"]
    if n_clusters is not None and not 1 <= n_clusters <= X.p:
        raise ConfigError(f"--n-clusters must lie in [1, {X.p}]")
    Xs, _, _ = standardize(X)
    part, dendro = cluster_columns(Xs, linkage=cfg["linkage"], height=float(cfg["cut_height"]), count=n_clusters)
    write_partition_csv(out / "partition.csv", part, X.column_ids)
    meta = {
        "run_config": cfg,
        "n_clusters": part.q,
        "groups": [[X.column_ids[j] for j in g] for g in part.groups],
        "dendrogram": dendro.merges.tolist(),
    }
    (out / "partition.json").write_text(json.dumps(meta, indent=2, sort_keys=True), encoding="utf-8")
    print(f"{part.q} clusters over {part.p} columns")
    return EXIT_OK


def _json_list(text, flag):
    try:
        v = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{flag}: {exc}") from None
    if not isinstance(v, list) or not all(isinstance(i, int) for i in v):
        raise ConfigError(f"{flag} must be a JSON list of integers")
    return v


def cmd_diagnose(cfg) -> int:
    from .clustering import read_partition_csv
    from .core import gram, standardize
    from .diagnostics import gir_check, ir_theta_exact

    xp = _require_file(cfg, "x", "--x")
    X, _ = _read_matrix(xp)
    out = _require_out(cfg)
    if cfg["set"] is None and cfg["active_groups"] is None:
        raise ConfigError("give --set and/or --groups with --active-groups")
    Xs, _, _ = standardize(X)
    sigma = gram(Xs)
    payload = {"run_config": cfg}
    if cfg["set"] is not None:
        S = cfg["set"] if isinstance(cfg["set"], list) else _json_list(cfg["set"], "--set")
        if any(not 0 <= j < X.p for j in S):
            raise ConfigError(f"--set indices must lie in [0, {X.p})")
        payload["ir"] = ir_theta_exact(sigma, S).to_dict()
    if cfg["active_groups"] is not None:
        gp = _require_file(cfg, "groups", "--groups")
        part = read_partition_csv(gp, X.column_ids)
        W = cfg["active_groups"]
        W = W if isinstance(W, list) else _json_list(W, "--active-groups")
        if any(not 0 <= r < part.q for r in W):
            raise ConfigError(f"--active-groups ids must lie in [0, {part.q})")
        seed = 0 if cfg["seed"] is None else int(cfg["seed"])
        payload["gir"] = gir_check(sigma=sigma, partition=part, active_groups=W, seed=seed).to_dict()
    (out / "diagnostics.json").write_text(json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8")
    if "ir" in payload:
        print(f"theta_exact {payload['ir']['theta_exact']:.6g}  holds {payload['ir']['holds_strict']}")
    if "gir" in payload:
        print(f"GIR holds {payload['gir']['holds']}  Lambda_min(R_W) {payload['gir']['rw_min_eigen']:.6g}")
    return EXIT_OK


def cmd_report(cfg) -> int:
    from .bench import TIMING_STAGES

    if not cfg["input"]:
        raise ConfigError("--input is required")
    src = Path(cfg["input"])
    path = src / "replicates.csv"
    if not path.is_file():
        raise ConfigError(f"{path} not found")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    methods = list(dict.fromkeys(r["method"] for r in rows))
    summary = []
    for m in methods:
        ok = [r for r in rows if r["method"] == m and not r["error"]]
        mses = np.array([float(r["mse_val"]) for r in ok])
        entry = {
            "method": m,
            "replicates": sum(r["method"] == m for r in rows),
            "failures": sum(r["method"] == m and bool(r["error"]) for r in rows),
            "mean_mse": float(mses.mean()) if ok else None,
            "sd_mse": float(mses.std(ddof=1)) if len(ok) > 1 else 0.0,
            "mean_tpr": float(np.mean([float(r["tpr"]) for r in ok])) if ok else None,
        }
        for st in TIMING_STAGES:
            entry[f"mean_time_{st}"] = float(np.mean([float(r[f"time_{st}"]) for r in ok])) if ok else None
        summary.append(entry)
        print(
            f"{m:>7}  MSE {entry['mean_mse']:.4g} ({entry['sd_mse']:.3g})  TPR {entry['mean_tpr']:.3f}  "
            f"time {entry['mean_time_total']:.3g}s  n={entry['replicates']}"
        )
    if cfg["out"]:
        out = _require_out(cfg)
        (out / "report.json").write_text(
            json.dumps({"run_config": cfg, "summary": summary}, indent=2, sort_keys=True), encoding="utf-8"
        )
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "cluster": cmd_cluster,
    "diagnose": cmd_diagnose,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        cfg = _resolve(args)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SingularSigma11, SingularGroupGram) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (ACLError, np.linalg.LinAlgError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
