"""Command-line front end: ``run``, ``sweep``, and ``stats``.

Exit codes: 0 success, 1 configuration error, 2 runtime failure.  The
``DMIMO_STFBC_WORKERS`` environment variable (or ``--workers``) sets how
many processes execute drops in parallel.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from .config import ConfigError, SimConfig, load_config
from .harness import aggregate, read_report_rows, run_experiment, sweep, write_report

__all__ = ["main"]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dmimo-stfbc",
        description="Orthogonal-coding spectral-efficiency campaigns for distributed MIMO.")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one campaign and write reports")
    run_p.add_argument("-c", "--config", help="JSON config file (omit for defaults)")
    run_p.add_argument("-o", "--out", required=True, help="output directory")
    run_p.add_argument("--drops", type=int, help="override the number of drops")
    run_p.add_argument("--workers", type=int, help="parallel drop workers")

    sweep_p = sub.add_parser("sweep", help="vary one deployment size over a list")
    sweep_p.add_argument("-c", "--config", help="JSON config file (omit for defaults)")
    sweep_p.add_argument("-o", "--out", required=True)
    sweep_p.add_argument("--param", required=True,
                         choices=("m_rus", "k_ues", "l_per_ru", "n_per_ue"))
    sweep_p.add_argument("--values", required=True,
                         help="comma-separated list, e.g. 4,8,16")
    sweep_p.add_argument("--drops", type=int)
    sweep_p.add_argument("--workers", type=int)

    stats_p = sub.add_parser("stats", help="re-aggregate stored report.csv files")
    stats_p.add_argument("-i", "--inputs", nargs="+", required=True,
                         help="report.csv files or directories containing one")
    stats_p.add_argument("-o", "--out", required=True)
    return parser


def _load(config_path: str | None) -> SimConfig:
    return load_config(config_path) if config_path else SimConfig()


def _cmd_run(args) -> int:
    config = _load(args.config)
    report = run_experiment(config, n_drops=args.drops, workers=args.workers)
    paths = write_report(report, args.out)
    agg = aggregate(report)
    for (method, metric), stats in sorted(agg.table.items()):
        print(f"{method:24s} {metric:8s} p5={stats['p5']:.4f} "
              f"median={stats['median']:.4f} (n={stats['n']})")
    print("wrote: " + ", ".join(paths))
    return 0


def _cmd_sweep(args) -> int:
    config = _load(args.config)
    values = [int(v) for v in args.values.split(",") if v.strip()]
    if not values:
        raise ConfigError("--values must list at least one integer")
    records = sweep(config, args.param, values, n_drops=args.drops,
                    workers=args.workers)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "sweep.csv")
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=("param", "value", "method",
                                                "metric", "p5", "median", "n"))
        writer.writeheader()
        writer.writerows(records)
    meta = {"param": args.param, "values": values, "config": config.to_dict()}
    with open(os.path.join(args.out, "sweep.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
    for rec in records:
        print(f"{rec['param']}={rec['value']:<4d} {rec['method']:24s} "
              f"{rec['metric']:8s} p5={rec['p5']:.4f} median={rec['median']:.4f}")
    print(f"wrote: {path}")
    return 0


def _cmd_stats(args) -> int:
    records = []
    for item in args.inputs:
        path = os.path.join(item, "report.csv") if os.path.isdir(item) else item
        records.extend(read_report_rows(path))
    if not records:
        raise ConfigError("no report rows found in the given inputs")
    pooled: dict[tuple[str, str], list[float]] = {}
    for method, metric, _user, _drop, value in records:
        if metric in ("ergodic", "outage"):
            pooled.setdefault((method, metric), []).append(value)
    os.makedirs(args.out, exist_ok=True)
    table = {
        f"{method}|{metric}": {
            "p5": float(np.percentile(vals, 5, method="weibull")),
            "median": float(np.percentile(vals, 50, method="weibull")),
            "n": len(vals),
        }
        for (method, metric), vals in sorted(pooled.items())
    }
    path = os.path.join(args.out, "stats.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(table, fh, indent=2, sort_keys=True)
    for key, stats in table.items():
        print(f"{key:32s} p5={stats['p5']:.4f} median={stats['median']:.4f} "
              f"(n={stats['n']})")
    print(f"wrote: {path}")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        return _cmd_stats(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
