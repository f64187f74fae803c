"""Request and response bodies of the HTTP service."""

from __future__ import annotations

from pydantic import BaseModel, Field


class ErrorBody(BaseModel):
    ok: bool = False
    error: str  # machine-readable code
    kind: str  # exception class
    message: str


class OptimizeRequest(BaseModel):
    config: str = Field(description="configuration text (key = value lines)")
    out_dir: str


class OptimizeResponse(BaseModel):
    schedule_csv: str
    trace_csv: str
    log_objective: float
    repaired: bool
    warnings: list[str] = []
    runtime_s: float


class SimulateRequest(BaseModel):
    config: str
    schedule_csv: str
    out_csv: str
    error_free: bool = False
    relaxed: list[str] = []


class SimulateResponse(BaseModel):
    history_csv: str
    final_gap: float | None
    final_accuracy: float | None
    mean_nmse_db: float | None
    ms: int


class BenchmarkRequest(BaseModel):
    config: str
    out_dir: str


class ReportRequest(BaseModel):
    directory: str


class StrategyRow(BaseModel):
    strategy: str
    trials: int
    ok: int
    final_gap: float | None
    final_gap_std: float | None
    final_accuracy: float | None
    mean_nmse_db: float | None
    ms_mean: float | None
    ms_max: int
    sigma_w: float | None
    relaxed: str
    runtime: float | None = None


class ReportResponse(BaseModel):
    directory: str
    strategies: dict[str, StrategyRow]
    ordering: list[str]
