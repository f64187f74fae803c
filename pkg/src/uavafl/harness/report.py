"""Summary statistics over completed trials and the plot script."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from uavafl.errors import ConfigurationError

TRIAL_COLUMNS = ("trial", "seed", "strategy", "status", "final_gap", "final_accuracy", "mean_nmse_db",
                 "ms", "sigma_w", "relaxed", "message")
SUMMARY_COLUMNS = ("strategy", "trials", "ok", "final_gap", "final_gap_std", "final_accuracy",
                   "mean_nmse_db", "ms_mean", "ms_max", "sigma_w", "relaxed")


@dataclass
class StrategySummary:
    strategy: str
    trials: int
    ok: int
    final_gap: float
    final_gap_std: float
    final_accuracy: float
    mean_nmse_db: float
    ms_mean: float
    ms_max: int
    sigma_w: float
    relaxed: str
    runtime: float = float("nan")


@dataclass
class ExperimentReport:
    directory: str
    strategies: dict[str, StrategySummary]

    def to_dict(self) -> dict:
        return {"directory": self.directory,
                "strategies": {k: _jsonable(asdict(v)) for k, v in self.strategies.items()}}

    def ordering(self, metric: str = "final_gap") -> list[str]:
        """Strategies best first (lowest gap, or highest accuracy)."""
        sign = -1.0 if metric == "final_accuracy" else 1.0
        vals = {k: getattr(v, metric) for k, v in self.strategies.items()}
        return sorted(vals, key=lambda k: (np.inf if np.isnan(vals[k]) else sign * vals[k], k))


def _jsonable(d: dict) -> dict:
    return {k: (None if isinstance(v, float) and not np.isfinite(v) else v) for k, v in d.items()}


def read_trials(directory: str | Path) -> list[dict]:
    path = Path(directory) / "trials.csv"
    if not path.is_file():
        raise ConfigurationError(f"no trials.csv in {directory}")
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _nanmean(v) -> float:
    v = np.asarray(v, float)
    v = v[~np.isnan(v)]
    return float(v.mean()) if v.size else float("nan")


def summarize(rows: list[dict], runtimes: dict | None = None) -> dict[str, StrategySummary]:
    order: list[str] = []
    for r in rows:
        if r["strategy"] not in order:
            order.append(r["strategy"])
    out = {}
    for name in order:
        mine = [r for r in rows if r["strategy"] == name]
        ok = [r for r in mine if r["status"] == "ok"]
        gaps = np.array([float(r["final_gap"]) for r in ok])
        ms = [int(r["ms"]) for r in ok]
        out[name] = StrategySummary(
            strategy=name, trials=len(mine), ok=len(ok),
            final_gap=_nanmean(gaps), final_gap_std=float(np.std(gaps)) if gaps.size else float("nan"),
            final_accuracy=_nanmean([float(r["final_accuracy"]) for r in ok]),
            mean_nmse_db=_nanmean([float(r["mean_nmse_db"]) for r in ok]),
            ms_mean=_nanmean(ms), ms_max=max(ms) if ms else -1,
            sigma_w=_nanmean([float(r["sigma_w"]) for r in mine]),
            relaxed=mine[0]["relaxed"],
            runtime=float((runtimes or {}).get(name, float("nan"))),
        )
    return out


def summary_csv(summaries: dict[str, StrategySummary]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for s in summaries.values():
        d = asdict(s)
        w.writerow([repr(d[c]) if isinstance(d[c], float) else d[c] for c in SUMMARY_COLUMNS])
    return buf.getvalue()


PLOT_SCRIPT = '''"""Curves from the history CSVs in this directory.

Usage: python plot_curves.py [output.png]
"""
import csv
import glob
import os
import sys
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

HERE = os.path.dirname(os.path.abspath(__file__))


def load(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {c: np.array([float(r[c]) for r in rows]) for c in rows[0]}


curves = defaultdict(list)
for path in sorted(glob.glob(os.path.join(HERE, "trial*_history.csv"))):
    strategy = os.path.basename(path).split("_", 1)[1].rsplit("_history", 1)[0]
    curves[strategy].append(load(path))

fig, axes = plt.subplots(1, 3, figsize=(15, 4))
for strategy, runs in sorted(curves.items()):
    n = min(len(r["k"]) for r in runs)
    k = runs[0]["k"][:n]
    gap = np.mean([r["gap"][:n] for r in runs], axis=0)
    acc = np.mean([r["test_acc"][:n] for r in runs], axis=0)
    ms = np.max([r["max_staleness"][:n] for r in runs], axis=0)
    axes[0].semilogy(k, np.maximum(gap, 1e-12), label=strategy)
    axes[1].plot(k, acc, label=strategy)
    axes[2].plot(k, ms, label=strategy)
axes[0].set_ylabel("optimality gap")
axes[1].set_ylabel("test accuracy")
axes[2].set_ylabel("max staleness")
for ax in axes:
    ax.set_xlabel("slot")
    ax.legend()
fig.tight_layout()
fig.savefig(sys.argv[1] if len(sys.argv) > 1 else os.path.join(HERE, "curves.png"), dpi=120)
'''


def write_report(directory: str | Path) -> ExperimentReport:
    """(Re)build ``summary.csv``, ``report.json`` and ``plot_curves.py`` from ``trials.csv``."""
    d = Path(directory)
    rows = read_trials(d)
    rt_path = d / "runtime.json"
    runtimes = json.loads(rt_path.read_text()) if rt_path.is_file() else {}
    summaries = summarize(rows, runtimes)
    (d / "summary.csv").write_text(summary_csv(summaries))
    report = ExperimentReport(str(d), summaries)
    (d / "report.json").write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    (d / "plot_curves.py").write_text(PLOT_SCRIPT)
    return report
