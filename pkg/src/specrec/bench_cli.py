"""Command-line benchmark harness: gen / run / summarize.

`run` executes a parameter grid x seed grid for one of the three
algorithms on a worker pool and writes one row per trial.  Rows are
emitted in deterministic (grid-order, seed-order) sequence regardless of
the worker count, and every non-timing column is reproducible
byte-for-byte for a fixed config; wall-clock measurements live in the
trailing *_ms columns only.  A JSON sidecar with per-cell success rates is
written next to the main output.

Config is a single JSON document, no environment variables:

    {
      "algorithm": "psv" | "tdecomp" | "tpca",
      "grid": {
        "n": [10000], "d": [50], "epsilon": [0.01, 0.05]      # psv
        "d": [40], "n": [45], "kappa": [3.9]                  # tdecomp
        "d": [100], "tau": [271.5]                            # tpca
      },
      "seeds": [1, 2, 3]            or  {"base": 1000, "count": 50},
      "power_iteration": {"max_iters": 500, "rq_tolerance": 1e-10},
      "workers": 2,                 # optional, default = cpu count
      "output": "out.csv",          # optional, overridden by --out
      "format": "csv",              # or "json"
      "basis_mode": "rotated",      # psv only
      "max_attempts": 2000,         # tdecomp only
      "refine_iters": 20,           # tdecomp only
      "dedup_cos2": 0.5             # tdecomp only
    }

Success definitions per algorithm: psv corr^2 >= 0.5; tdecomp all n
components matched with |cos| >= 0.9; tpca correlation >= 0.9.

Exit codes: 0 all cells completed (success or algorithmic failure),
2 invalid config, 3 at least one trial raised.
"""

import argparse
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import instances
from .overcomplete import DecompConfig, decompose_all
from .planted_sparse import centered_leverage_matrix
from .tensor_core import PowerIterSettings, power_iteration
from .tensor_pca import partial_trace_matrix

SCHEMA = "specrec-bench-v1"
COLUMNS = [
    "algorithm", "n", "d", "epsilon", "tau", "kappa", "seed", "status",
    "success", "correlation", "correlation_sq", "min_cos", "found",
    "attempts", "power_iters", "gap_ratio", "error",
]
TIMING_COLUMNS = ["gen_ms", "build_ms", "iterate_ms", "extract_ms"]


class ConfigError(Exception):
    """Invalid config; message carries the offending field path."""


@dataclass(frozen=True)
class ExperimentConfig:
    algorithm: str
    grid: dict
    seeds: list
    settings: PowerIterSettings
    workers: int
    output: str | None
    format: str
    extras: dict

    def cells(self):
        """Grid cells in deterministic axis order."""
        axes = _GRID_AXES[self.algorithm]
        def rec(i, current):
            if i == len(axes):
                yield dict(current)
                return
            for value in self.grid[axes[i]]:
                current[axes[i]] = value
                yield from rec(i + 1, current)
                del current[axes[i]]
        yield from rec(0, {})


_GRID_AXES = {
    "psv": ("n", "d", "epsilon"),
    "tdecomp": ("d", "n", "kappa"),
    "tpca": ("d", "tau"),
}


def _fail(path, msg):
    raise ConfigError(f"config field '{path}': {msg}")


def parse_config(doc: dict) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("top level must be a JSON object")
    algorithm = doc.get("algorithm")
    if algorithm not in _GRID_AXES:
        _fail("algorithm", f"must be one of {sorted(_GRID_AXES)}, got {algorithm!r}")
    grid = doc.get("grid")
    if not isinstance(grid, dict):
        _fail("grid", "must be an object of parameter lists")
    parsed_grid = {}
    for axis in _GRID_AXES[algorithm]:
        values = grid.get(axis)
        if not isinstance(values, list) or not values:
            _fail(f"grid.{axis}", "must be a non-empty list")
        for k, v in enumerate(values):
            if not isinstance(v, (int, float)) or isinstance(v, bool):
                _fail(f"grid.{axis}[{k}]", f"must be a number, got {v!r}")
        parsed_grid[axis] = list(values)

    seeds_doc = doc.get("seeds")
    if isinstance(seeds_doc, list) and seeds_doc and all(
        isinstance(s, int) and not isinstance(s, bool) for s in seeds_doc
    ):
        seeds = list(seeds_doc)
    elif isinstance(seeds_doc, dict) and isinstance(seeds_doc.get("base"), int) and isinstance(
        seeds_doc.get("count"), int
    ) and seeds_doc["count"] >= 1:
        seeds = list(range(seeds_doc["base"], seeds_doc["base"] + seeds_doc["count"]))
    else:
        _fail("seeds", "must be a non-empty list of ints or {base, count}")

    pi = doc.get("power_iteration", {})
    if not isinstance(pi, dict):
        _fail("power_iteration", "must be an object")
    try:
        settings = PowerIterSettings(
            max_iters=int(pi.get("max_iters", 500)),
            rq_tolerance=float(pi.get("rq_tolerance", 1e-10)),
            seed=int(pi.get("seed", 0)),
        )
    except (TypeError, ValueError) as e:
        _fail("power_iteration", str(e))

    workers = doc.get("workers", os.cpu_count() or 1)
    if not isinstance(workers, int) or workers < 1:
        _fail("workers", f"must be a positive integer, got {workers!r}")
    fmt = doc.get("format", "csv")
    if fmt not in ("csv", "json"):
        _fail("format", f"must be 'csv' or 'json', got {fmt!r}")
    output = doc.get("output")
    if output is not None and not isinstance(output, str):
        _fail("output", "must be a string path")

    extras = {}
    if algorithm == "psv":
        extras["basis_mode"] = doc.get("basis_mode", "rotated")
        if extras["basis_mode"] not in ("rotated", "good"):
            _fail("basis_mode", "must be 'rotated' or 'good'")
    if algorithm == "tdecomp":
        for key, default in (("max_attempts", None), ("refine_iters", 20), ("dedup_cos2", 0.5)):
            value = doc.get(key, default)
            if value is not None and not isinstance(value, (int, float)):
                _fail(key, "must be a number")
            extras[key] = value
    return ExperimentConfig(
        algorithm=algorithm, grid=parsed_grid, seeds=seeds, settings=settings,
        workers=workers, output=output, format=fmt, extras=extras,
    )


def validate_cells(cfg: ExperimentConfig):
    """Split grid cells into runnable and skipped (with reasons)."""
    good, skipped = [], []
    for cell in cfg.cells():
        reason = None
        if cfg.algorithm == "psv":
            n, d, eps = int(cell["n"]), int(cell["d"]), float(cell["epsilon"])
            if not 1 <= d <= n:
                reason = "requires 1 <= d <= n"
            elif not 0 < eps <= 1 or int(np.floor(eps * n)) < 1:
                reason = "requires 0 < epsilon <= 1 and floor(epsilon*n) >= 1"
        elif cfg.algorithm == "tdecomp":
            d, n = int(cell["d"]), int(cell["n"])
            if d < 2 or n < 1:
                reason = "requires d >= 2 and n >= 1"
        else:
            d, tau = int(cell["d"]), float(cell["tau"])
            if d < 2 or tau < 0:
                reason = "requires d >= 2 and tau >= 0"
        (skipped if reason else good).append((cell, reason) if reason else cell)
    return good, skipped


def _run_psv(cell, seed, settings, extras):
    n, d, eps = int(cell["n"]), int(cell["d"]), float(cell["epsilon"])
    t0 = time.perf_counter()
    inst = instances.gen_planted_sparse(n, d, eps, seed, extras["basis_mode"])
    t1 = time.perf_counter()
    a = centered_leverage_matrix(inst.W)
    t2 = time.perf_counter()
    report = power_iteration(lambda x: a @ x, d, settings)
    t3 = time.perf_counter()
    su = inst.W @ report.eigvec
    corr_sq = float(np.dot(su, inst.v0)) ** 2
    t4 = time.perf_counter()
    return {
        "success": corr_sq >= 0.5,
        "correlation": "",
        "correlation_sq": corr_sq,
        "min_cos": "",
        "found": "",
        "attempts": "",
        "power_iters": report.iters_used,
        "gap_ratio": report.gap_ratio,
        "gen_ms": (t1 - t0) * 1e3,
        "build_ms": (t2 - t1) * 1e3,
        "iterate_ms": (t3 - t2) * 1e3,
        "extract_ms": (t4 - t3) * 1e3,
    }


def _run_tdecomp(cell, seed, settings, extras):
    d, n = int(cell["d"]), int(cell["n"])
    kappa = float(cell["kappa"])
    t0 = time.perf_counter()
    inst = instances.gen_overcomplete(d, n, seed)
    t1 = time.perf_counter()
    cfg = DecompConfig(
        kappa=kappa,
        max_attempts=None if extras["max_attempts"] is None else int(extras["max_attempts"]),
        dedup_cos2=float(extras["dedup_cos2"]),
        refine_iters=int(extras["refine_iters"]),
        settings=settings,
    )
    found, report = decompose_all(inst.tensor, d, n, cfg, seed, components=inst.components)
    t2 = time.perf_counter()
    min_cos = report.min_matched_cos if report.min_matched_cos is not None else 0.0
    return {
        "success": (not report.exhausted) and min_cos >= 0.9,
        "correlation": "",
        "correlation_sq": "",
        "min_cos": min_cos,
        "found": len(found),
        "attempts": report.attempts_used,
        "power_iters": "",
        "gap_ratio": "",
        "gen_ms": (t1 - t0) * 1e3,
        "build_ms": 0.0,
        "iterate_ms": (t2 - t1) * 1e3,
        "extract_ms": 0.0,
    }


def _run_tpca(cell, seed, settings, extras):
    d, tau = int(cell["d"]), float(cell["tau"])
    t0 = time.perf_counter()
    inst = instances.gen_spiked(d, tau, seed)
    t1 = time.perf_counter()
    m = partial_trace_matrix(inst.tensor)
    t2 = time.perf_counter()
    report = power_iteration(lambda x: m @ x, d, settings)
    t3 = time.perf_counter()
    u = report.eigvec
    if float(((inst.tensor.entries @ u) @ u) @ u) < 0:
        u = -u
    corr = float(np.dot(inst.v, u))
    t4 = time.perf_counter()
    return {
        "success": corr >= 0.9,
        "correlation": corr,
        "correlation_sq": "",
        "min_cos": "",
        "found": "",
        "attempts": "",
        "power_iters": report.iters_used,
        "gap_ratio": report.gap_ratio,
        "gen_ms": (t1 - t0) * 1e3,
        "build_ms": (t2 - t1) * 1e3,
        "iterate_ms": (t3 - t2) * 1e3,
        "extract_ms": (t4 - t3) * 1e3,
    }


_RUNNERS = {"psv": _run_psv, "tdecomp": _run_tdecomp, "tpca": _run_tpca}


def _trial(args):
    algorithm, cell, seed, settings, extras = args
    row = {c: "" for c in COLUMNS + TIMING_COLUMNS}
    row.update({"algorithm": algorithm, "seed": seed, "status": "ok"})
    for key in ("n", "d", "epsilon", "tau", "kappa"):
        if key in cell:
            row[key] = cell[key]
    try:
        row.update(_RUNNERS[algorithm](cell, seed, settings, extras))
    except Exception as e:  # cell-level failure becomes a row, not a crash
        row["status"] = "error"
        row["success"] = ""
        msg = f"{type(e).__name__}: {e}"
        row["error"] = msg.replace(",", ";").replace("\n", " ")
    return row


def _format_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_rows(rows, out_path, fmt):
    if fmt == "csv":
        lines = [f"# {SCHEMA}", ",".join(COLUMNS + TIMING_COLUMNS)]
        for row in rows:
            lines.append(",".join(_format_value(row.get(c, "")) for c in COLUMNS + TIMING_COLUMNS))
        text = "\n".join(lines) + "\n"
    else:
        text = json.dumps({"schema": SCHEMA, "rows": rows}, sort_keys=True, default=float)
    with open(out_path, "w") as f:
        f.write(text)


def read_rows(path):
    """Parse a report (csv or json); returns (rows, malformed_count)."""
    with open(path) as f:
        text = f.read()
    if text.lstrip().startswith("{"):
        doc = json.loads(text)
        return list(doc.get("rows", [])), 0
    lines = [l for l in text.splitlines() if l.strip()]
    lines = [l for l in lines if not l.startswith("#")]
    if not lines:
        return [], 0
    header = lines[0].split(",")
    rows, bad = [], 0
    for line in lines[1:]:
        parts = line.split(",")
        if len(parts) != len(header):
            bad += 1
            continue
        rows.append(dict(zip(header, parts)))
    return rows, bad


def _cell_key(row):
    return tuple(str(row.get(k, "")) for k in ("algorithm", "n", "d", "epsilon", "tau", "kappa"))


def _to_float(x):
    try:
        return float(x)
    except (TypeError, ValueError):
        return None


def summarize_rows(rows):
    """One aggregate row per grid cell: success rate, median correlation, timing quantiles."""
    cells = {}
    for row in rows:
        cells.setdefault(_cell_key(row), []).append(row)
    out = []
    for key in sorted(cells):
        group = cells[key]
        corr = []
        for r in group:
            for col in ("correlation", "correlation_sq", "min_cos"):
                c = _to_float(r.get(col))
                if c is not None:
                    corr.append(c)
                    break
        succ = [str(r.get("success", "")).lower() == "true" for r in group if r.get("status") == "ok"]
        total_ms = []
        for r in group:
            parts = [_to_float(r.get(c)) for c in TIMING_COLUMNS]
            if any(p is not None for p in parts):
                total_ms.append(sum(p for p in parts if p is not None))
        entry = dict(zip(("algorithm", "n", "d", "epsilon", "tau", "kappa"), key))
        entry["trials"] = len(group)
        entry["errors"] = sum(1 for r in group if r.get("status") == "error")
        entry["success_rate"] = (sum(succ) / len(succ)) if succ else ""
        entry["median_correlation"] = float(np.median(corr)) if corr else ""
        if total_ms:
            entry["p50_ms"] = float(np.percentile(total_ms, 50))
            entry["p90_ms"] = float(np.percentile(total_ms, 90))
        else:
            entry["p50_ms"] = entry["p90_ms"] = ""
        out.append(entry)
    return out


def run(cfg: ExperimentConfig, out_path: str):
    """Execute the full grid; returns (rows, skipped, any_error)."""
    good, skipped = validate_cells(cfg)
    for cell, reason in skipped:
        print(f"skipping cell {cell}: {reason}", file=sys.stderr)
    tasks = [
        (cfg.algorithm, cell, seed, cfg.settings, cfg.extras)
        for cell in good
        for seed in cfg.seeds
    ]
    if cfg.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            rows = list(pool.map(_trial, tasks, chunksize=1))
    else:
        rows = [_trial(t) for t in tasks]
    write_rows(rows, out_path, cfg.format)
    sidecar = summarize_rows(rows)
    with open(out_path + ".summary.json", "w") as f:
        json.dump({"schema": SCHEMA + "-summary", "cells": sidecar}, f, sort_keys=True, indent=1)
    any_error = any(r["status"] == "error" for r in rows)
    return rows, skipped, any_error


# ---------------------------------------------------------------------------
# CLI


def _load_config(path):
    try:
        with open(path) as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}")
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: line {e.lineno} column {e.colno}: {e.msg}")


def _cmd_gen(args):
    doc = _load_config(args.config)
    model = doc.get("model")
    seed = doc.get("seed", 0)
    if not isinstance(seed, int):
        raise ConfigError("config field 'seed': must be an integer")
    try:
        if model == "psv":
            inst = instances.gen_planted_sparse(
                int(doc["n"]), int(doc["d"]), float(doc["epsilon"]), seed,
                doc.get("basis_mode", "rotated"),
            )
        elif model == "tdecomp":
            inst = instances.gen_overcomplete(int(doc["d"]), int(doc["n"]), seed)
        elif model == "tpca":
            inst = instances.gen_spiked(int(doc["d"]), float(doc["tau"]), seed)
        else:
            raise ConfigError(
                f"config field 'model': must be 'psv', 'tdecomp' or 'tpca', got {model!r}"
            )
    except KeyError as e:
        raise ConfigError(f"config field {e}: required for model {model!r}")
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid {model!r} parameters: {e}")
    out = args.out or doc.get("output")
    if not out:
        raise ConfigError("no output path: pass --out or set 'output'")
    instances.save(inst, out, "bin" if args.format == "bin" else "json")
    print(f"wrote {model} instance to {out}")
    return 0


def _cmd_run(args):
    from dataclasses import replace

    doc = _load_config(args.config)
    cfg = parse_config(doc)
    if args.workers is not None:
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        cfg = replace(cfg, workers=args.workers)
    if args.format is not None:
        cfg = replace(cfg, format=args.format)
    out = args.out or cfg.output
    if not out:
        raise ConfigError("no output path: pass --out or set 'output'")
    rows, skipped, any_error = run(cfg, out)
    print(f"wrote {len(rows)} rows to {out} ({len(skipped)} cells skipped)")
    return 3 if any_error else 0


def _cmd_summarize(args):
    rows, bad = read_rows(args.report)
    if bad:
        print(f"warning: {bad} malformed rows ignored", file=sys.stderr)
    if not rows:
        print("warning: empty report", file=sys.stderr)
    table = summarize_rows(rows)
    cols = ["algorithm", "n", "d", "epsilon", "tau", "kappa", "trials", "errors",
            "success_rate", "median_correlation", "p50_ms", "p90_ms"]
    if args.format == "json":
        text = json.dumps({"cells": table}, sort_keys=True, indent=1)
    else:
        lines = [",".join(cols)]
        for entry in table:
            lines.append(",".join(_format_value(entry.get(c, "")) for c in cols))
        text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as f:
            f.write(text)
    else:
        print(text, end="")
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="specrec", description="spectral recovery benchmark harness"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen", help="generate an instance file")
    p_gen.add_argument("--config", required=True)
    p_gen.add_argument("--out")
    p_gen.add_argument("--format", choices=["json", "bin"], default="json")
    p_gen.set_defaults(func=_cmd_gen)

    p_run = sub.add_parser("run", help="run a benchmark grid")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out")
    p_run.add_argument("--workers", type=int)
    p_run.add_argument("--format", choices=["csv", "json"])
    p_run.set_defaults(func=_cmd_run)

    p_sum = sub.add_parser("summarize", help="aggregate a report")
    p_sum.add_argument("report")
    p_sum.add_argument("--out")
    p_sum.add_argument("--format", choices=["csv", "json"], default="csv")
    p_sum.set_defaults(func=_cmd_summarize)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
