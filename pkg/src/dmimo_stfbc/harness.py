"""Experiment orchestration: drops, aggregation, and report files.

One *drop* places a fresh deployment, clusters it for the orthogonal-coding
method, prices every configured method per user (closed-form ergodic rates
plus Monte-Carlo outage rates where outage is defined), and emits one row
per (method, user).  A campaign pools rows over drops; summary statistics
are the 5th percentile and median of the pooled per-user values.

Everything is keyed by the master seed: deployment, trial, and fallback
streams are counter-split per (seed, drop, purpose), so a campaign's output
is reproducible byte-for-byte regardless of worker count.
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import streams
from .baselines import baseline_se, mrt_map, sfn_map, smallcell_map
from .channel import noise_variance, place_on_grids
from .clustering import cluster_deployment
from .config import SimConfig, load_config, parse_method
from .montecarlo import outage_se, sinr_realizations
from .rates import ClosedFormRateEngine

__all__ = [
    "ReportRow",
    "RateReport",
    "Aggregate",
    "load_config",
    "run_drop",
    "run_experiment",
    "aggregate",
    "write_report",
    "read_report_rows",
    "sweep",
    "worker_count",
]

WORKERS_ENV = "DMIMO_STFBC_WORKERS"

# Methods for which an outage rate is defined (no transmitter CSI).
_OUTAGE_METHODS = ("alamouti", "smallcell", "sfn")


@dataclass(frozen=True)
class ReportRow:
    """One (drop, method, user) result."""

    drop: int
    method: str
    user: int
    se_ergodic: float
    se_outage: float | None = None
    cluster_type: int | None = None
    mc_fallback: bool = False


@dataclass
class RateReport:
    """All rows of a campaign plus the configuration that produced them."""

    config: SimConfig
    rows: list[ReportRow] = field(default_factory=list)

    @property
    def fallback_users(self) -> int:
        return sum(r.mc_fallback for r in self.rows)

    def values(self, method: str, metric: str) -> np.ndarray:
        if metric == "ergodic":
            vals = [r.se_ergodic for r in self.rows if r.method == method]
        elif metric == "outage":
            vals = [r.se_outage for r in self.rows
                    if r.method == method and r.se_outage is not None]
        else:
            raise ValueError(f"unknown metric {metric!r}")
        return np.asarray(vals, dtype=float)


def worker_count(explicit: int | None = None) -> int:
    if explicit is not None:
        return max(1, int(explicit))
    return max(1, int(os.environ.get(WORKERS_ENV, "1")))


def run_drop(config: SimConfig, drop_index: int) -> list[ReportRow]:
    """Evaluate every configured method on one random deployment."""
    noise_w = noise_variance(config.bandwidth_hz, config.noise_figure_db)
    p_t = config.p_t_watts
    dep = place_on_grids(
        config, streams.substream(config.seed, drop_index, streams.DEPLOYMENT))
    rows: list[ReportRow] = []
    for mi, method_spec in enumerate(config.methods):
        name, csi = parse_method(method_spec)
        if name == "alamouti":
            engine = ClosedFormRateEngine(
                dep, p_t, noise_w,
                rng=streams.substream(config.seed, drop_index, streams.RATE_GUARD))
            assignment, _ = cluster_deployment(dep, engine)
            se, flags = engine.per_user_se_detail(assignment)
            samples = sinr_realizations(
                assignment, dep, config.n_trial,
                streams.substream(config.seed, drop_index, streams.ORTHOGONAL_MC),
                p_t, noise_w)
            outage = outage_se(samples, config.p_out)
            for k in range(dep.n_ues):
                rows.append(ReportRow(
                    drop=drop_index, method=method_spec, user=k,
                    se_ergodic=float(se[k]), se_outage=float(outage.se_outage[k]),
                    cluster_type=assignment.cluster_of(k).type_id,
                    mc_fallback=bool(flags[k])))
            continue

        if name == "smallcell":
            serving = smallcell_map(dep)
        elif name == "sfn":
            serving = sfn_map(dep)
        elif name == "mrt95":
            serving = mrt_map(dep, "p95")
        else:
            serving = mrt_map(dep, "single_ru")
        result = baseline_se(
            serving, dep, csi, config.n_trial,
            streams.substream(config.seed, drop_index, streams.BASELINE_MC, mi),
            p_t, noise_w)
        outage_vals = None
        if name in _OUTAGE_METHODS and result.samples is not None:
            outage_vals = outage_se(result.samples, config.p_out).se_outage
        for k in range(dep.n_ues):
            rows.append(ReportRow(
                drop=drop_index, method=method_spec, user=k,
                se_ergodic=float(result.se[k]),
                se_outage=None if outage_vals is None else float(outage_vals[k])))
    return rows


def run_experiment(config: SimConfig, n_drops: int | None = None,
                   workers: int | None = None) -> RateReport:
    """Run a whole campaign; drops execute independently and merge in order."""
    n_drops = config.n_drops if n_drops is None else int(n_drops)
    workers = worker_count(workers)
    report = RateReport(config=config)
    if workers == 1:
        for drop in range(n_drops):
            report.rows.extend(run_drop(config, drop))
        return report
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for drop_rows in pool.map(run_drop, [config] * n_drops, range(n_drops)):
            report.rows.extend(drop_rows)
    return report


@dataclass(frozen=True)
class Aggregate:
    """Percentile table and empirical CDF samples per (method, metric)."""

    table: dict[tuple[str, str], dict[str, float]]
    cdf: dict[tuple[str, str], np.ndarray]  # columns: value, cumulative prob


def aggregate(report: RateReport, min_samples: int = 20) -> Aggregate:
    """Pool per-user values across drops into percentiles and CDFs.

    Percentiles interpolate order statistics at plotting positions
    ``q * (n + 1)`` so e.g. values 1..100 give a 5th percentile of 5.05.
    """
    methods = list(dict.fromkeys(r.method for r in report.rows))
    table: dict[tuple[str, str], dict[str, float]] = {}
    cdf: dict[tuple[str, str], np.ndarray] = {}
    for method in methods:
        for metric in ("ergodic", "outage"):
            vals = report.values(method, metric)
            if vals.size == 0:
                continue
            if vals.size < min_samples:
                raise ValueError(
                    f"{method}/{metric}: only {vals.size} samples, "
                    f"need at least {min_samples}")
            table[(method, metric)] = {
                "p5": float(np.percentile(vals, 5, method="weibull")),
                "median": float(np.percentile(vals, 50, method="weibull")),
                "n": int(vals.size),
            }
            ordered = np.sort(vals)
            probs = np.arange(1, ordered.size + 1) / ordered.size
            cdf[(method, metric)] = np.column_stack([ordered, probs])
    return Aggregate(table=table, cdf=cdf)


def _row_records(report: RateReport):
    for r in sorted(report.rows, key=lambda r: (r.drop, r.method, r.user)):
        yield (r.method, "ergodic", r.user, r.drop, r.se_ergodic)
        if r.se_outage is not None:
            yield (r.method, "outage", r.user, r.drop, r.se_outage)
        if r.cluster_type is not None:
            yield (r.method, "cluster_type", r.user, r.drop, float(r.cluster_type))


def write_report(report: RateReport, out_dir: str | os.PathLike,
                 formats: tuple[str, ...] = ("csv", "json")) -> list[str]:
    """Write report.csv / cdf.csv / summary.json; returns the paths written.

    Output contains no timestamps, so identical (seed, config) campaigns
    produce identical bytes.
    """
    os.makedirs(out_dir, exist_ok=True)
    written: list[str] = []
    if "csv" in formats:
        path = os.path.join(out_dir, "report.csv")
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["method", "metric", "user", "drop", "value"])
            for method, metric, user, drop, value in _row_records(report):
                writer.writerow([method, metric, user, drop, repr(float(value))])
        written.append(path)
        agg = aggregate(report) if report.rows else None
        cdf_path = os.path.join(out_dir, "cdf.csv")
        with open(cdf_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["method", "metric", "value", "cum_prob"])
            if agg is not None:
                for (method, metric), points in sorted(agg.cdf.items()):
                    for value, prob in points:
                        writer.writerow([method, metric, repr(float(value)),
                                         repr(float(prob))])
        written.append(cdf_path)
    if "json" in formats:
        agg = aggregate(report) if report.rows else Aggregate({}, {})
        summary = {
            "seed": report.config.seed,
            "config": report.config.to_dict(),
            "percentiles": {
                f"{method}|{metric}": stats
                for (method, metric), stats in sorted(agg.table.items())
            },
            "closed_form_mc_fallback_users": report.fallback_users,
        }
        path = os.path.join(out_dir, "summary.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
        written.append(path)
    return written


def read_report_rows(path: str | os.PathLike) -> list[tuple[str, str, int, int, float]]:
    """Read back a report.csv written by :func:`write_report`."""
    records = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            records.append((row["method"], row["metric"], int(row["user"]),
                            int(row["drop"]), float(row["value"])))
    return records


_SWEEP_PARAMS = ("m_rus", "k_ues", "l_per_ru", "n_per_ue")


def sweep(config: SimConfig, param: str, values, n_drops: int | None = None,
          workers: int | None = None) -> list[dict]:
    """Run one campaign per value of a deployment-size parameter.

    Returns percentile records suitable for plotting rate-vs-size trends:
    one dict per (value, method, metric).
    """
    if param not in _SWEEP_PARAMS:
        raise ValueError(f"sweep parameter must be one of {_SWEEP_PARAMS}")
    records = []
    for value in values:
        sub = config.replace(**{param: int(value)})
        agg = aggregate(run_experiment(sub, n_drops=n_drops, workers=workers))
        for (method, metric), stats in sorted(agg.table.items()):
            records.append({
                "param": param, "value": int(value), "method": method,
                "metric": metric, "p5": stats["p5"], "median": stats["median"],
                "n": stats["n"],
            })
    return records
