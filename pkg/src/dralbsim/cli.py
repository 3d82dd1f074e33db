"""Command-line entry point: config ingestion, experiment presets and
CSV/JSON result emission.

Exit codes: 0 ok, 2 config error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from . import __version__
from .engine import THREADS_ENV, SimConfig, run_many, thread_cap
from .metrics import MetricsReport
from .schedulers import PolicyKind

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3

DEFAULT_SEEDS = 20
POLICIES = tuple(PolicyKind)


class ConfigError(ValueError):
    pass


# config file ---------------------------------------------------------------

def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _floats(text: str) -> Tuple[float, ...]:
    parts = [p for p in text.replace(" ", "").split(",") if p]
    if not parts:
        raise ValueError("expected a comma-separated list of numbers")
    return tuple(float(p) for p in parts)


def _pair(text: str) -> Tuple[float, float]:
    vals = _floats(text)
    if len(vals) != 2:
        raise ValueError(f"expected 'low, high', got {text!r}")
    return vals


# key -> (parser, SimConfig field or dotted sub-field)
_SIM_KEYS: Dict[str, Tuple[Callable[[str], object], str]] = {
    "policy": (PolicyKind.parse, "policy"),
    "hosts": (int, "host_count"),
    "vms_per_host": (int, "vms_per_host"),
    "tasks": (int, "task_count"),
    "arrival_rate": (float, "arrival_rate"),
    "seed": (int, "seed"),
    "sample_interval": (float, "sample_interval"),
    "cluster_size": (int, "cluster_size"),
    "service_time": (float, "service_time"),
    "batch_arrivals": (_bool, "batch_arrivals"),
    "rebalance": (_bool, "rebalance"),
    "vm_mips": (_floats, "vm_mips"),
    "vm_ram": (float, "vm_ram"),
    "vm_bw": (float, "vm_bw"),
    "vm_energy": (float, "vm_energy"),
    "vm_storage": (float, "vm_storage"),
    "power_work": (float, "power_work"),
    "power_idle": (float, "power_idle"),
    "power_standby": (float, "power_standby"),
    "rt_threshold": (float, "contract.rt_threshold"),
    "ruc_threshold": (float, "contract.ruc_threshold"),
    "price": (float, "contract.price_per_unit"),
    "penalty": (float, "contract.penalty_per_unit"),
    "cost": (float, "contract.cost_per_unit"),
    "length": (_pair, "workload.length"),
    "file_size": (_pair, "workload.file_size"),
    "output_size": (_pair, "workload.output_size"),
    "bandwidth": (_pair, "workload.bandwidth"),
    "energy_per_mips": (_pair, "workload.energy_per_mips"),
}
# keys that configure the run rather than a single cell
_RUN_KEYS: Dict[str, Callable[[str], object]] = {"seeds": int}

CONFIG_KEYS = tuple(sorted(list(_SIM_KEYS) + list(_RUN_KEYS)))


def read_config_text(text: str, source: str = "<config>") -> Dict[str, object]:
    """Parse ``key = value`` lines; ``#`` starts a comment.

    Returns parsed values keyed by config key. Malformed lines, unknown or
    repeated keys and unparsable values raise :class:`ConfigError` naming
    the line.
    """
    values: Dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, _, val = (s.strip() for s in line.partition("="))
        key = key.replace("-", "_").lower()
        if key not in _SIM_KEYS and key not in _RUN_KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        if not val:
            raise ConfigError(f"{source}:{lineno}: missing value for {key!r}")
        parser = _SIM_KEYS[key][0] if key in _SIM_KEYS else _RUN_KEYS[key]
        try:
            values[key] = parser(val)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key!r}: {exc}") from None
    return values


def read_config_file(path: str) -> Dict[str, object]:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return read_config_text(text, path)


def build_config(values: Dict[str, object], base: Optional[SimConfig] = None) -> SimConfig:
    """Apply parsed values over ``base`` (defaults when omitted) and validate."""
    cfg = base or SimConfig()
    top, contract, workload = {}, {}, {}
    for key, val in values.items():
        if key in _RUN_KEYS:
            continue
        target = _SIM_KEYS[key][1]
        if target.startswith("contract."):
            contract[target.split(".", 1)[1]] = val
        elif target.startswith("workload."):
            workload[target.split(".", 1)[1]] = val
        else:
            top[target] = val
    try:
        if contract:
            top["contract"] = replace(cfg.contract, **contract)
        if workload:
            top["workload"] = replace(cfg.workload, **workload)
        cfg = replace(cfg, **top)
        cfg.validate()
    except ValueError as exc:
        raise ConfigError(f"invalid configuration: {exc}") from None
    return cfg


def parse_config(path: Optional[str] = None,
                 flags: Optional[Dict[str, object]] = None) -> SimConfig:
    """Config file values, then flag values on top, then validation."""
    values = read_config_file(path) if path else {}
    values.update({k: v for k, v in (flags or {}).items() if v is not None})
    return build_config(values)


# presets -------------------------------------------------------------------

@dataclass
class Cell:
    """One point of an experiment grid, before seeds are expanded."""
    preset: str
    config: SimConfig
    params: Dict[str, object] = field(default_factory=dict)


def _grid(name: str, base: SimConfig, points: Sequence[Dict[str, object]],
          policies: Sequence[PolicyKind]) -> List[Cell]:
    cells = []
    for point in points:
        for pol in policies:
            cfg = replace(base, policy=pol, **point)
            cfg.validate()
            cells.append(Cell(name, cfg, dict(point)))
    return cells


def preset(name: str, base: Optional[SimConfig] = None,
           policies: Sequence[PolicyKind] = POLICIES) -> List[Cell]:
    """Named experiment grids.

    table2  batch makespan: tasks 40..200 x VM count 100/200
    table3  batch utilization at 20 hosts, one regime with fewer tasks than
            VMs and one with more
    fig2    response time vs arrival rate, 400 tasks, 100 hosts (T < R)
    fig3    response time vs arrival rate, 1000 tasks, 50 hosts (T > R)
    fig4    batch failures vs requested tasks 0..200 on 10 hosts
    fig5    traffic overflow vs traffic intensity (batch size) on 20 hosts
    """
    base = base or SimConfig()
    n = base.vms_per_host
    rates = [10.0, 20.0, 40.0, 80.0, 160.0]
    if name == "table2":
        points = [dict(task_count=t, host_count=v // n, batch_arrivals=True)
                  for t in (40, 80, 120, 160, 200) for v in (100, 200)]
    elif name == "table3":
        points = [dict(task_count=t, host_count=20, batch_arrivals=True) for t in (150, 400)]
    elif name == "fig2":
        points = [dict(task_count=400, host_count=100, arrival_rate=r, batch_arrivals=False)
                  for r in rates]
    elif name == "fig3":
        points = [dict(task_count=1000, host_count=50, arrival_rate=r, batch_arrivals=False)
                  for r in rates]
    elif name == "fig4":
        points = [dict(task_count=t, host_count=10, batch_arrivals=True)
                  for t in range(0, 201, 20)]
    elif name == "fig5":
        points = [dict(task_count=t, host_count=20, batch_arrivals=True)
                  for t in range(25, 201, 25)]
    else:
        raise ConfigError(f"unknown preset {name!r}; expected one of {list(PRESETS)}")
    try:
        return _grid(name, base, points, policies)
    except ValueError as exc:
        raise ConfigError(f"preset {name}: {exc}") from None


PRESETS = ("table2", "table3", "fig2", "fig3", "fig4", "fig5")


# emission ------------------------------------------------------------------

CELL_COLUMNS = ("cell", "preset", "policy", "hosts", "vms_per_host", "tasks",
                "arrival_rate", "batch_arrivals", "seed")
METRIC_COLUMNS = ("makespan", "avg_response_time", "dc_utilization", "mean_utilization",
                  "wastage_pct", "failures", "sla_vrate", "pf", "energy_total",
                  "mean_traffic_overflow", "tasks_total", "tasks_placed", "migrations")
COLUMNS = CELL_COLUMNS + METRIC_COLUMNS


@dataclass
class RunResult:
    cell_index: int
    cell: Cell
    config: SimConfig
    report: MetricsReport


def result_row(res: RunResult) -> Dict[str, object]:
    c = res.config
    row: Dict[str, object] = {
        "cell": res.cell_index, "preset": res.cell.preset, "policy": c.policy.value,
        "hosts": c.host_count, "vms_per_host": c.vms_per_host, "tasks": c.task_count,
        "arrival_rate": float(c.arrival_rate), "batch_arrivals": int(c.batch_arrivals),
        "seed": c.seed,
    }
    row.update(res.report.row())
    return row


def _fmt(v: object) -> str:
    # repr is locale independent and round-trips floats exactly
    return repr(float(v)) if isinstance(v, float) else str(v)


def render_csv(rows: Sequence[Dict[str, object]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for row in rows:
        w.writerow([_fmt(row[k]) for k in COLUMNS])
    return buf.getvalue()


def render_json(rows: Sequence[Dict[str, object]]) -> str:
    return json.dumps({"columns": list(COLUMNS),
                       "rows": [{k: row[k] for k in COLUMNS} for row in rows]},
                      indent=1, allow_nan=True) + "\n"


def _atomic_write(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=d)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit(results: Sequence[RunResult], fmt: str, out_dir: str,
         manifest_extra: Optional[Dict[str, object]] = None) -> List[str]:
    """Write ``results.<fmt>`` then ``manifest.json``; returns the paths.

    Raises ``OSError`` when the directory cannot be created or written.
    """
    if not results:
        raise ValueError("no results to emit")
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown format {fmt!r}")
    os.makedirs(out_dir, exist_ok=True)
    rows = [result_row(r) for r in results]
    data_path = os.path.join(out_dir, f"results.{fmt}")
    _atomic_write(data_path, render_csv(rows) if fmt == "csv" else render_json(rows))
    manifest = {
        "tool": "dralbsim",
        "version": __version__,
        "format": fmt,
        "columns": list(COLUMNS),
        "cells": _cell_echo(results),
        "seeds": sorted({r.config.seed for r in results}),
        "outputs": [os.path.abspath(data_path)],
    }
    manifest.update(manifest_extra or {})
    man_path = os.path.join(out_dir, "manifest.json")
    _atomic_write(man_path, json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return [data_path, man_path]


def _cell_echo(results: Sequence[RunResult]) -> List[Dict[str, object]]:
    seen: Dict[int, Dict[str, object]] = {}
    for r in results:
        if r.cell_index not in seen:
            echo = _config_echo(r.cell.config)
            seen[r.cell_index] = dict(cell=r.cell_index, preset=r.cell.preset, **echo)
    return [seen[i] for i in sorted(seen)]


def _config_echo(cfg: SimConfig) -> Dict[str, object]:
    c, w = cfg.contract, cfg.workload
    return {
        "policy": cfg.policy.value, "hosts": cfg.host_count, "vms_per_host": cfg.vms_per_host,
        "tasks": cfg.task_count, "arrival_rate": cfg.arrival_rate,
        "sample_interval": cfg.sample_interval, "cluster_size": cfg.cluster_size,
        "service_time": cfg.service_time, "batch_arrivals": cfg.batch_arrivals,
        "rebalance": cfg.rebalance, "vm_mips": list(cfg.vm_mips), "vm_ram": cfg.vm_ram,
        "vm_bw": cfg.vm_bw, "vm_energy": cfg.vm_energy, "vm_storage": cfg.vm_storage,
        "power_work": cfg.power_work, "power_idle": cfg.power_idle,
        "power_standby": cfg.power_standby,
        "rt_threshold": c.rt_threshold if c.rt_threshold != float("inf") else "auto",
        "ruc_threshold": c.ruc_threshold, "price": c.price_per_unit,
        "penalty": c.penalty_per_unit, "cost": c.cost_per_unit,
        "length": list(w.length), "file_size": list(w.file_size),
        "output_size": list(w.output_size), "bandwidth": list(w.bandwidth),
        "energy_per_mips": list(w.energy_per_mips),
    }


# orchestration -------------------------------------------------------------

def expand(cells: Sequence[Cell], n_seeds: int) -> List[Tuple[int, Cell, SimConfig]]:
    """Cell-major, seed-minor list of runs; seeds are ``seed + 0..n_seeds-1``."""
    if n_seeds < 1:
        raise ConfigError("seeds must be >= 1")
    return [(i, cell, replace(cell.config, seed=cell.config.seed + k))
            for i, cell in enumerate(cells) for k in range(n_seeds)]


def execute(cells: Sequence[Cell], n_seeds: int,
            threads: Optional[int] = None) -> List[RunResult]:
    plan = expand(cells, n_seeds)
    reports = run_many([cfg for _, _, cfg in plan], threads)
    return [RunResult(i, cell, cfg, rep) for (i, cell, cfg), rep in zip(plan, reports)]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dralbsim", description=__doc__.splitlines()[0])
    p.add_argument("--policy", choices=[k.value for k in PolicyKind])
    p.add_argument("--hosts", type=int)
    p.add_argument("--vms-per-host", type=int)
    p.add_argument("--tasks", type=int)
    p.add_argument("--arrival-rate", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--seeds", type=int, help=f"replications per cell (preset default {DEFAULT_SEEDS})")
    p.add_argument("--preset", help=f"one of {', '.join(PRESETS)}")
    p.add_argument("--config", help="flat 'key = value' file")
    p.add_argument("--out", default="out", help="output directory (default: out)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG
    started = time.monotonic()
    try:
        values = read_config_file(args.config) if args.config else {}
        flags = {"policy": args.policy and PolicyKind.parse(args.policy), "hosts": args.hosts,
                 "vms_per_host": args.vms_per_host, "tasks": args.tasks,
                 "arrival_rate": args.arrival_rate, "seed": args.seed, "seeds": args.seeds}
        values.update({k: v for k, v in flags.items() if v is not None})
        base = build_config(values)
        if args.preset:
            pols = [base.policy] if args.policy else list(POLICIES)
            cells = preset(args.preset, base, pols)
            n_seeds = int(values.get("seeds", DEFAULT_SEEDS))
        else:
            cells = [Cell("single", base, {})]
            n_seeds = int(values.get("seeds", 1))
        threads = thread_cap()
        plan_size = len(cells) * n_seeds
        if n_seeds < 1:
            raise ConfigError("seeds must be >= 1")
    except (ConfigError, ValueError) as exc:
        print(f"dralbsim: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    results = execute(cells, n_seeds, threads)
    extra = {"wall_clock_s": round(time.monotonic() - started, 3), "runs": plan_size,
             "preset": args.preset, "config_file": args.config,
             "threads_env": os.environ.get(THREADS_ENV)}
    try:
        paths = emit(results, args.format, args.out, extra)
    except OSError as exc:
        print(f"dralbsim: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"wrote {plan_size} rows to {paths[0]}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
