"""HTTP front end over the harness. Paths in requests are server-side paths."""

from __future__ import annotations

import math
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from uavafl import __version__
from uavafl.errors import ConfigurationError, UavAflError
from uavafl.harness.config import parse_config
from uavafl.harness.experiment import optimize_schedule, run_experiment, simulate_schedule
from uavafl.harness.report import ExperimentReport, write_report
from uavafl.schedule import Schedule
from uavafl.service.models import (
    BenchmarkRequest,
    ErrorBody,
    OptimizeRequest,
    OptimizeResponse,
    ReportRequest,
    ReportResponse,
    SimulateRequest,
    SimulateResponse,
    StrategyRow,
)

app = FastAPI(title="uavafl", version=__version__)


@app.exception_handler(UavAflError)
async def domain_error(request: Request, exc: UavAflError):
    body = ErrorBody(error=exc.code, kind=type(exc).__name__, message=str(exc))
    return JSONResponse(status_code=422, content=body.model_dump())


def _finite(v: float) -> float | None:
    return float(v) if math.isfinite(v) else None


def _report_response(report: ExperimentReport) -> ReportResponse:
    rows = {}
    for k, s in report.strategies.items():
        d = {f: getattr(s, f) for f in StrategyRow.model_fields}
        rows[k] = StrategyRow(**{f: _finite(v) if isinstance(v, float) else v for f, v in d.items()})
    return ReportResponse(directory=report.directory, strategies=rows, ordering=report.ordering())


@app.get("/health")
def health():
    return {"status": "ok", "version": __version__}


@app.post("/optimize", response_model=OptimizeResponse)
def optimize(req: OptimizeRequest):
    config = parse_config(req.config)
    out = Path(req.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    res = optimize_schedule(config)
    sched_path, trace_path = out / "schedule.csv", out / "trace.csv"
    res.schedule.to_csv(sched_path)
    res.trace_csv(trace_path)
    return OptimizeResponse(schedule_csv=str(sched_path), trace_csv=str(trace_path),
                            log_objective=res.log_objective, repaired=res.repaired,
                            warnings=list(res.warnings), runtime_s=res.runtime)


@app.post("/simulate", response_model=SimulateResponse)
def simulate(req: SimulateRequest):
    config = parse_config(req.config)
    if not Path(req.schedule_csv).is_file():
        raise ConfigurationError(f"schedule file not found: {req.schedule_csv}")
    sched = Schedule.from_csv(Path(req.schedule_csv), label="simulated")
    sched = sched.with_(error_free=req.error_free, relaxed=tuple(req.relaxed))
    hist = simulate_schedule(config, sched)
    out = Path(req.out_csv)
    out.parent.mkdir(parents=True, exist_ok=True)
    hist.to_csv(out)
    w = min(config.eval_window, config.K)
    return SimulateResponse(history_csv=str(out), final_gap=_finite(hist.final_gap(w)),
                            final_accuracy=_finite(hist.final_accuracy(w)),
                            mean_nmse_db=_finite(hist.mean_nmse_db()), ms=hist.ms)


@app.post("/benchmark", response_model=ReportResponse)
def benchmark(req: BenchmarkRequest):
    return _report_response(run_experiment(parse_config(req.config), req.out_dir))


@app.post("/report", response_model=ReportResponse)
def report(req: ReportRequest):
    return _report_response(write_report(req.directory))
