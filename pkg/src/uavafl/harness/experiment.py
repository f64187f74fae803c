"""Monte-Carlo experiment orchestration and persistence."""

from __future__ import annotations

import csv
import io
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from uavafl.afl import TrainingHistory, make_logistic_task, make_quadratic_task, run_hierarchical_training, run_training
from uavafl.afl.tasks import LearningTask
from uavafl.errors import InfeasibleProblemError, UavAflError
from uavafl.harness.config import ExperimentConfig, trial_seeds
from uavafl.harness.report import TRIAL_COLUMNS, ExperimentReport, write_report
from uavafl.harness.strategies import Plan, cf_plan, make_plans, uav_afl_plan
from uavafl.optimizer import build_problem
from uavafl.params import BoundParams
from uavafl.scenario import Scenario, sigma_w
from uavafl.schedule import Schedule

log = logging.getLogger(__name__)


@dataclass
class TrialResult:
    trial: int
    seed: int
    strategy: str
    status: str  # ok | infeasible | error
    message: str = ""
    final_gap: float = float("nan")
    final_accuracy: float = float("nan")
    mean_nmse_db: float = float("nan")
    ms: int = -1
    sigma_w: float = float("nan")
    relaxed: tuple[str, ...] = ()
    runtime: float = 0.0
    history: TrainingHistory | None = field(default=None, repr=False)
    schedule: Schedule | None = field(default=None, repr=False)

    def row(self) -> dict:
        return {
            "trial": self.trial, "seed": self.seed, "strategy": self.strategy, "status": self.status,
            "final_gap": _fmt(self.final_gap), "final_accuracy": _fmt(self.final_accuracy),
            "mean_nmse_db": _fmt(self.mean_nmse_db), "ms": self.ms, "sigma_w": _fmt(self.sigma_w),
            "relaxed": "+".join(self.relaxed), "message": self.message,
        }


def _fmt(v: float) -> str:
    return "nan" if np.isnan(v) else repr(float(v))


def make_task(config: ExperimentConfig, seed: int) -> LearningTask:
    if config.task == "quadratic":
        return make_quadratic_task(seed, config.M, D=config.dim, mu=config.mu, L=config.L,
                                   heterogeneity=config.heterogeneity)
    return make_logistic_task(seed, config.M, D=config.dim, heterogeneity=config.heterogeneity)


def simulate_plan(plan: Plan, scenario: Scenario, task: LearningTask, params: BoundParams,
                  seed: int, n_slots: int) -> TrainingHistory:
    if plan.hierarchical:
        return run_hierarchical_training(scenario, plan.schedule.Q, task, params, seed, n_slots)
    return run_training(scenario, plan.schedule, task, params, seed, n_slots)


def run_trial(config: ExperimentConfig, trial: int, seed: int) -> list[TrialResult]:
    """Every requested strategy on one scenario and task drawn from ``seed``."""
    scenario = config.make_scenario(seed)
    task = make_task(config, seed)
    params = config.bound_params()
    t0 = time.perf_counter()
    plans = make_plans(config.strategies, scenario, params, config.K_cycle, config.K, config.solver_kw())
    shared = time.perf_counter() - t0
    spread = sigma_w(scenario)
    out = []
    for kind, plan in plans.items():
        if isinstance(plan, Exception):
            status = "infeasible" if isinstance(plan, UavAflError) else "error"
            out.append(TrialResult(trial, seed, kind, status, str(plan), sigma_w=spread))
            continue
        t1 = time.perf_counter()
        try:
            hist = simulate_plan(plan, scenario, task, params, seed, config.K)
        except UavAflError as exc:
            out.append(TrialResult(trial, seed, kind, "infeasible", str(exc), sigma_w=spread,
                                   relaxed=plan.schedule.relaxed, schedule=plan.schedule))
            continue
        w = min(config.eval_window, config.K)
        out.append(TrialResult(
            trial, seed, kind, "ok", final_gap=hist.final_gap(w), final_accuracy=hist.final_accuracy(w),
            mean_nmse_db=hist.mean_nmse_db(), ms=hist.ms, sigma_w=spread, relaxed=plan.schedule.relaxed,
            runtime=plan.runtime + (time.perf_counter() - t1), history=hist, schedule=plan.schedule))
    log.info("trial %d (seed %d) planned in %.1f s", trial, seed, shared)
    return out


def optimize_schedule(config: ExperimentConfig):
    """Optimized schedule for trial 0's scenario (the CF solve joins the starts)."""
    scenario = config.make_scenario(trial_seeds(config)[0])
    spec = build_problem(scenario, config.bound_params(), config.K_cycle, cyclic=True)
    try:
        start = cf_plan(spec, **config.solver_kw()).schedule
    except InfeasibleProblemError:
        start = None
    _, res = uav_afl_plan(spec, start, **config.solver_kw())
    return res


def simulate_schedule(config: ExperimentConfig, schedule: Schedule) -> TrainingHistory:
    """Train on trial 0's scenario and task with ``schedule`` repeated over K slots."""
    seed = trial_seeds(config)[0]
    scenario = config.make_scenario(seed)
    return run_training(scenario, schedule, make_task(config, seed), config.bound_params(), seed, config.K)


def _run_trial_args(args):
    return run_trial(*args)


def run_experiment(config: ExperimentConfig, out_dir: str | Path) -> ExperimentReport:
    """Run all trials, write per-trial CSVs, then the summary and plot script.

    Files: ``config.txt``, ``trials.csv``, ``trialNN_<strategy>_history.csv``
    and ``..._schedule.csv``, plus everything ``write_report`` emits. CSVs
    depend only on the configuration, so reruns are byte-identical.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(config, t, s) for t, s in enumerate(trial_seeds(config))]
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            per_trial = list(pool.map(_run_trial_args, jobs))
    else:
        per_trial = [run_trial(*job) for job in jobs]
    results = [r for trial in per_trial for r in trial]
    (out / "config.txt").write_text(config.to_text())
    for r in results:
        stem = f"trial{r.trial:02d}_{r.strategy}"
        if r.history is not None:
            r.history.to_csv(out / f"{stem}_history.csv")
        if r.schedule is not None:
            r.schedule.to_csv(out / f"{stem}_schedule.csv")
    (out / "trials.csv").write_text(trials_csv(results))
    runtimes = {}
    for r in results:
        runtimes.setdefault(r.strategy, []).append(r.runtime)
    (out / "runtime.json").write_text(json.dumps(
        {k: float(np.mean(v)) for k, v in runtimes.items()}, indent=2, sort_keys=True) + "\n")
    return write_report(out)


def trials_csv(results: list[TrialResult]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=TRIAL_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in results:
        w.writerow(r.row())
    return buf.getvalue()
