"""Command-line entry point: ``covgm match | simulate | oracle``.

Relative output paths are resolved against ``$COVGM_OUTPUT_DIR`` when it is
set. Failures print one JSON error record on stderr and exit non-zero; no
output file is written in that case.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import time
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import __version__
from .assign import Sense, brute_force_lap
from .dataio import InputError, InputSpec, atomic_write_text, load_inputs
from .glm import LinkKind
from .matchers import METHOD_NAMES, run_method
from .qap import FaqOptions, brute_force_qap
from .simulate import SimConfig, rep_seed, run_grid

SCHEMA_VERSION = 1
OUTPUT_DIR_ENV = "COVGM_OUTPUT_DIR"

log = logging.getLogger("covgm")


class ConfigError(ValueError):
    pass


def resolve_output(path) -> Path:
    p = Path(path)
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not p.is_absolute():
        p = Path(base) / p
    return p


def _load_json(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return data


def _dumps(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=False, allow_nan=False) + "\n"


# ---------------------------------------------------------------- match


def build_input_spec(args) -> InputSpec:
    known = {f.name for f in fields(InputSpec)}
    values = {}
    if args.config:
        data = _load_json(args.config)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        values.update(data)
    for name in known:
        v = getattr(args, name, None)
        if v is not None and v != []:
            values[name] = v
    for name in ("graph_a_path", "graph_b_path", "seeds_path"):
        if not values.get(name):
            raise ConfigError(f"missing required input {name}")
    for name in ("edge_cov_paths", "transforms"):
        values[name] = tuple(values.get(name) or ())
    spec = InputSpec(**values)
    if spec.method not in METHOD_NAMES:
        raise ConfigError(f"unknown method {spec.method!r}; choose from {', '.join(METHOD_NAMES)}")
    LinkKind.parse(spec.link)
    FaqOptions(spec.max_iter, spec.rel_tol, spec.init, spec.rng_seed)
    return spec


def run_match_command(spec: InputSpec) -> dict:
    """Run one matcher and return the output document."""
    data = load_inputs(spec)
    opts = FaqOptions(spec.max_iter, spec.rel_tol, spec.init, spec.rng_seed)
    t0 = time.perf_counter()
    res = run_method(spec.method, data.a, data.b_tilde, data.covariates, data.seeds,
                     LinkKind.parse(spec.link), opts, spec.standardize)
    wall = time.perf_counter() - t0
    inv = res.permutation.inverse()
    pairs = [[data.labels_a[k], data.labels_b[int(inv.map[k])]] for k in range(data.a.n)]
    glm = res.fit.to_dict(data.covariates.coef_names()) if res.fit is not None else None
    return {
        "schema_version": SCHEMA_VERSION,
        "tool": "covgm",
        "version": __version__,
        "method": res.method,
        "n_vertices": data.a.n,
        "n_seeds": data.seeds.s,
        "correspondence": pairs,
        "objective": res.objective,
        "wall_time": wall,
        "glm": glm,
        "diagnostics": {k: v for k, v in res.extra.items()},
        "config": {**spec.to_dict(), "faq": opts.to_dict(), "rng_seed": spec.rng_seed},
    }


# ---------------------------------------------------------------- simulate

CSV_COLUMNS = ("alpha", "gamma", "sign", "n", "n_seeds", "method", "rep", "rep_seed",
               "matching_error", "objective", "n_clamped")


def parse_sim_config(data: dict) -> tuple[SimConfig, list, list, list, int]:
    data = dict(data)
    alphas = data.pop("alphas", None)
    gammas = data.pop("gammas", None)
    methods = data.pop("methods", list(METHOD_NAMES))
    n_jobs = int(data.pop("n_jobs", 1))
    if alphas is None:
        alphas = [data.get("alpha", SimConfig.alpha)]
    if gammas is None:
        gammas = [data.get("gamma", SimConfig.gamma)]
    for name, grid in (("alphas", alphas), ("gammas", gammas)):
        if not isinstance(grid, list) or not grid:
            raise ConfigError(f"{name} must be a non-empty list")
        for v in grid:
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
                raise ConfigError(f"{name} contains a non-numeric value {v!r}")
    if any(a < 0 for a in alphas):
        raise ConfigError("alphas must be non-negative")
    if any(not 0 <= g <= 1 for g in gammas):
        raise ConfigError("gammas must lie in [0, 1]")
    if not isinstance(methods, list) or not methods:
        raise ConfigError("methods must be a non-empty list")
    for m in methods:
        if m not in METHOD_NAMES:
            raise ConfigError(f"unknown method {m!r}")
    known = {f.name for f in fields(SimConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    try:
        cfg = SimConfig(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    return cfg, [float(a) for a in alphas], [float(g) for g in gammas], methods, n_jobs


def simulation_tables(cfg, grid) -> tuple[str, dict]:
    """Tidy CSV text (deterministic columns only) and the JSON summary."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    cells = []
    for alpha, gamma, summary in grid:
        for r in summary.records:
            writer.writerow([repr(alpha), repr(gamma), cfg.sign.value, cfg.n, cfg.n_seeds,
                             r.method, r.rep, r.rep_seed, repr(r.matching_error),
                             repr(r.objective), r.n_clamped])
        cells.append({
            "alpha": alpha,
            "gamma": gamma,
            "theta": list(summary.config.theta),
            "stats": {m: {"mean_error": st.mean_error, "std_error": st.std_error,
                          "mean_wall_time": st.mean_wall_time, "n_reps": st.n_reps}
                      for m, st in summary.stats.items()},
        })
    doc = {
        "schema_version": SCHEMA_VERSION,
        "tool": "covgm",
        "version": __version__,
        "base_rng_seed": cfg.base_rng_seed,
        "rep_seeds": [rep_seed(cfg.base_rng_seed, r) for r in range(cfg.n_reps)],
        "config": cfg.to_dict(),
        "cells": cells,
    }
    return buf.getvalue(), doc


def run_simulate_command(config_path, out_dir) -> tuple[Path, Path]:
    cfg, alphas, gammas, methods, n_jobs = parse_sim_config(_load_json(config_path))
    grid = run_grid(cfg, alphas, gammas, methods, n_jobs)
    csv_text, doc = simulation_tables(cfg, grid)
    doc["alphas"], doc["gammas"], doc["methods"] = alphas, gammas, methods
    out = resolve_output(out_dir)
    csv_path, json_path = out / "results.csv", out / "summary.json"
    atomic_write_text(csv_path, csv_text)
    atomic_write_text(json_path, _dumps(doc))
    return csv_path, json_path


# ---------------------------------------------------------------- oracle


def _read_matrix(path) -> np.ndarray:
    if str(path).endswith(".npy"):
        return np.load(path)
    try:
        return np.loadtxt(path, delimiter=",", ndmin=2)
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from None


def run_oracle_command(args) -> dict:
    if args.problem == "lap":
        if not args.cost:
            raise ConfigError("lap oracle needs --cost")
        perm, obj = brute_force_lap(_read_matrix(args.cost), Sense(args.sense))
        return {"schema_version": SCHEMA_VERSION, "problem": "lap", "sense": args.sense,
                "assignment": perm.map.tolist(), "objective": obj}
    for name in ("graph_a_path", "graph_b_path", "seeds_path"):
        if not getattr(args, name):
            raise ConfigError(f"qap oracle needs --{name.replace('_path', '').replace('_', '-')}")
    spec = InputSpec(args.graph_a_path, args.graph_b_path, args.seeds_path)
    data = load_inputs(spec)
    q, obj = brute_force_qap(data.a, data.b_tilde, data.seeds)
    inv = q.inverse()
    pairs = [[data.labels_a[k], data.labels_b[int(inv.map[k])]] for k in range(data.a.n)]
    return {"schema_version": SCHEMA_VERSION, "problem": "qap",
            "correspondence": pairs, "objective": obj}


# ---------------------------------------------------------------- wiring


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="covgm", description="Covariate-assisted seeded graph matching")
    ap.add_argument("--version", action="version", version=f"covgm {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    m = sub.add_parser("match", help="match two graphs from files")
    m.add_argument("--config", help="JSON file with InputSpec keys; flags override it")
    m.add_argument("--graph-a", dest="graph_a_path")
    m.add_argument("--graph-b", dest="graph_b_path")
    m.add_argument("--seeds", dest="seeds_path")
    m.add_argument("--edge-cov", dest="edge_cov_paths", action="append", default=[])
    m.add_argument("--node-cov", dest="node_cov_path")
    m.add_argument("--transform", dest="transforms", action="append", default=[],
                   help="abs-diff or equality, once per node covariate column")
    m.add_argument("--link", choices=[k.value for k in LinkKind])
    m.add_argument("--method", choices=METHOD_NAMES)
    m.add_argument("--max-iter", type=int)
    m.add_argument("--rel-tol", type=float)
    m.add_argument("--init", choices=["barycenter", "randomized"])
    m.add_argument("--rng-seed", type=int)
    m.add_argument("--standardize", action="store_const", const=True, default=None)
    m.add_argument("-o", "--output", dest="output_path")

    s = sub.add_parser("simulate", help="run the synthetic benchmark grid")
    s.add_argument("config", help="JSON simulation config")
    s.add_argument("-o", "--out-dir", default="sim_out")

    o = sub.add_parser("oracle", help="exact brute-force solutions for small inputs")
    o.add_argument("problem", choices=["lap", "qap"])
    o.add_argument("--cost", help="CSV or .npy cost matrix (lap)")
    o.add_argument("--sense", choices=["min", "max"], default="min")
    o.add_argument("--graph-a", dest="graph_a_path")
    o.add_argument("--graph-b", dest="graph_b_path")
    o.add_argument("--seeds", dest="seeds_path")
    o.add_argument("-o", "--output", dest="output_path")
    return ap


def _emit(doc: dict, output_path) -> None:
    text = _dumps(doc)
    if output_path:
        atomic_write_text(resolve_output(output_path), text)
    else:
        sys.stdout.write(text)


def _error(exc: BaseException) -> int:
    record = {"error": type(exc).__name__, "message": str(exc).replace("\n", " ")}
    sys.stderr.write(json.dumps(record) + "\n")
    return 2 if isinstance(exc, (ConfigError, InputError, OSError)) else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "match":
            spec = build_input_spec(args)
            _emit(run_match_command(spec), spec.output_path)
        elif args.command == "simulate":
            csv_path, json_path = run_simulate_command(args.config, args.out_dir)
            log.info("wrote %s and %s", csv_path, json_path)
        else:
            _emit(run_oracle_command(args), args.output_path)
    except Exception as exc:  # noqa: BLE001 - converted to an error record
        return _error(exc)
    return 0


if __name__ == "__main__":
    sys.exit(main())
