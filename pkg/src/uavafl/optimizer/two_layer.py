"""Outer penalty loop around alternating slack / selection / trajectory blocks."""

from __future__ import annotations

import csv
import io
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from uavafl.aircomp import optimal_zeta
from uavafl.errors import InfeasibleProblemError, SolverError, UavAflError
from uavafl.optimizer.problem import ProblemSpec, initial_selection
from uavafl.optimizer.starts import best_start
from uavafl.optimizer.subproblems import (
    SelectionBlock,
    TrajectoryBlock,
    binary_violation,
    log_objective,
    max_fractional,
    penalized_objective,
    polish_amplitudes,
    slack_update,
    tight_y,
)
from uavafl.scenario import channel_magnitudes, validate_trajectory
from uavafl.schedule import Schedule
from uavafl.trajectory import circle_trajectory

log = logging.getLogger(__name__)

ACCEPT_TOL = 1e-12


@dataclass
class TraceRow:
    outer: int
    inner: int
    objective: float
    binary_violation: float
    max_fractional: float
    eta: float


@dataclass
class OptimizerState:
    Q: np.ndarray
    A: np.ndarray
    Abar: np.ndarray
    B: np.ndarray
    y: np.ndarray
    eta: float
    inner: int = 0
    outer: int = 0
    trace: list[TraceRow] = field(default_factory=list)

    @property
    def p(self) -> np.ndarray:
        return np.exp(self.y)


@dataclass
class SolveResult:
    schedule: Schedule
    state: OptimizerState
    log_objective: float
    relaxed_log_objective: float
    repaired: bool
    warnings: list[str]
    runtime: float

    def trace_csv(self, path: str | Path | None = None) -> str:
        return trace_to_csv(self.state.trace, path)


def trace_to_csv(trace: list[TraceRow], path: str | Path | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["outer", "inner", "objective", "binary_violation", "max_fractional", "eta"])
    for r in trace:
        w.writerow([r.outer, r.inner, repr(r.objective), repr(r.binary_violation),
                    repr(r.max_fractional), repr(r.eta)])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def _window_rows(W: np.ndarray, start: int) -> np.ndarray:
    return np.flatnonzero(W[start - 1] > 0)


def round_and_repair(spec: ProblemSpec, A: np.ndarray, fallback: np.ndarray) -> tuple[np.ndarray, bool]:
    """Threshold at 0.5, then fix each device row greedily; a row that cannot
    be fixed is replaced by its ``fallback`` row (constraints are per device)."""
    R = (np.asarray(A) >= 0.5).astype(float)
    repaired = False
    for m in range(spec.M):
        c = np.array([spec.compute_times[m]])
        for _ in range(4 * spec.K):
            v = _row_violation(spec, R[m], c)
            if v is None:
                break
            repaired = True
            if v.kind == "busy":
                idx = _window_rows(spec.busy_windows[int(c[0])][1], v.slot)
                on = idx[R[m, idx] > 0]
                R[m, on[np.argmin(A[m, on])]] = 0.0
            else:
                idx = _window_rows(spec.stale_windows, v.slot)
                order = idx[np.argsort(-A[m, idx], kind="stable")]
                for j in order:
                    trial = R[m].copy()
                    trial[j] = 1.0
                    bad = _row_violation(spec, trial, c)
                    if bad is None or bad.kind != "busy":
                        R[m] = trial
                        break
                else:
                    R[m] = fallback[m]
        if _row_violation(spec, R[m], c) is not None:
            R[m] = fallback[m]
            repaired = True
    return R, repaired


def _row_violation(spec: ProblemSpec, row, c):
    from uavafl.constraints import check_selection

    bad = check_selection(row[None, :], spec.params.S, c, spec.cyclic, first_only=True)
    return bad[0] if bad else None


def denoising_factors(spec: ProblemSpec, A, B, Q) -> np.ndarray:
    """Per-slot denoising factor for unit-variance gradients."""
    h = channel_magnitudes(spec.scenario, np.asarray(Q)[1:])
    Z = np.zeros(spec.K)
    for k in range(spec.K):
        sel = np.flatnonzero(A[:, k] > 0.5)
        if sel.size:
            Z[k] = optimal_zeta(h[sel, k], B[sel, k], np.ones(sel.size), spec.noise_power)
    return Z


def default_initial_trajectory(spec: ProblemSpec) -> np.ndarray:
    try:
        return circle_trajectory(spec.scenario, spec.K)
    except UavAflError:
        return np.tile(spec.scenario.q_F, (spec.K + 1, 1))


def two_layer_solve(spec: ProblemSpec, init: dict | None = None, eps1: float = 1e-2,
                    eps2: float = 1.0, eta0: float = 10.0, s: float = 0.5,
                    max_inner: int = 20, max_outer: int = 15, fix_trajectory: bool = False,
                    time_limit: float | None = None, label: str = "uav_afl",
                    multi_start: bool = True, extra_starts: list[dict] | None = None) -> SolveResult:
    """Penalty/SCA optimization of trajectory, selection and amplitudes.

    ``init`` may supply ``Q``, ``A`` and ``B``; ``A`` may be fractional as
    long as it meets the staleness and busy windows. Without a ``Q`` the start is
    the best of several trajectory families (see ``starts``) and of
    ``extra_starts``, or just the circular tour when ``multi_start`` is off.
    Missing ``A`` defaults to regular polling phased by the objective, and
    missing ``B`` to full power. With ``fix_trajectory`` only the selection
    and amplitudes are optimized.
    """
    if not (0 < s < 1) or eta0 <= 0:
        raise ValueError("need 0 < s < 1 and eta0 > 0")
    t0 = time.perf_counter()
    init = dict(init or {})
    sc = spec.scenario
    if "Q" not in init and multi_start:
        start = best_start(spec, extra_starts)
        init = {"Q": start["Q"], "A": start["A"], "B": start["B"]}
        log.info("starting from the %s trajectory", start["name"])
    Q = np.array(init["Q"], float) if "Q" in init else default_initial_trajectory(spec)
    if validate_trajectory(sc, Q, K=spec.K):
        raise InfeasibleProblemError("initial trajectory violates mechanics limits")
    if "A" in init:
        A = np.array(init["A"], float)
    else:
        A = initial_selection(spec, Q, lambda a: log_objective(spec, a, polish_amplitudes(spec, a, Q), Q))
    bad = spec.check(A, first_only=True, binary=False)
    if bad:
        raise InfeasibleProblemError(f"initial selection infeasible: {bad[0]}")
    start_binary = not spec.check(A, first_only=True)
    B = np.array(init["B"], float) if "B" in init else np.full((spec.M, spec.K), sc.b_max)
    # rows that cannot be repaired after rounding fall back to a binary feasible start
    A_init = A.copy() if start_binary else initial_selection(spec, Q)
    eta = float(eta0)
    state = OptimizerState(Q=Q, A=A, Abar=A.copy(), B=B, y=tight_y(spec, A, B, Q), eta=eta)
    sel_block = SelectionBlock(spec)
    traj_block = None if fix_trajectory else TrajectoryBlock(spec)
    warnings: list[str] = []

    def L(st: OptimizerState) -> float:
        return penalized_objective(spec, st.A, st.Abar, st.B, st.Q, st.eta)

    # best binary-feasible point seen so far (the start is one)
    B0 = polish_amplitudes(spec, A, Q)
    best = (log_objective(spec, A, B0, Q) if start_binary else np.inf, A.copy(), B0, Q.copy())
    state.trace.append(TraceRow(0, 0, L(state), binary_violation(state.A, state.Abar),
                                max_fractional(state.A), eta))

    def out_of_time() -> bool:
        return time_limit is not None and time.perf_counter() - t0 > time_limit

    for outer in range(1, max_outer + 1):
        state.outer = outer
        state.eta = eta
        prev = L(state)
        state.trace.append(TraceRow(outer, 0, prev, binary_violation(state.A, state.Abar),
                                    max_fractional(state.A), eta))
        # after the first round, entries may not move further from {0, 1}
        # than the worst entry did, so the fractional distance never grows
        bounds = None
        if outer > 1:
            cap = max_fractional(state.A)
            upper = state.A > 0.5
            bounds = (np.where(upper, 1.0 - cap, 0.0), np.where(upper, 1.0, cap))
        for inner in range(1, max_inner + 1):
            state.inner = inner
            state.Abar = slack_update(state.A)
            # selection block
            try:
                sol = sel_block.solve(state.A, state.Abar, state.B, state.Q, eta, state.y, bounds=bounds)
                A_new = np.clip(sol.variables["A"], 0.0, 1.0)
                if bounds is not None:
                    A_new = np.clip(A_new, *bounds)
                A_new[np.abs(A_new) < 1e-9] = 0.0
                A_new[np.abs(A_new - 1) < 1e-9] = 1.0
                if not spec.check(A_new, first_only=True, binary=False):
                    cand = penalized_objective(spec, A_new, state.Abar, state.B, state.Q, eta)
                    if cand <= L(state) + ACCEPT_TOL * abs(L(state)):
                        state.A = A_new
            except (SolverError, InfeasibleProblemError) as exc:
                warnings.append(f"selection block: {exc}")
            # trajectory and amplitude block
            B_pol = polish_amplitudes(spec, state.A, state.Q)
            cands = [(state.Q, B_pol)]
            if traj_block is not None:
                try:
                    sol = traj_block.solve(state.A, state.B, state.Q, tight_y(spec, state.A, state.B, state.Q))
                    Q_new = sol.variables["Q"]
                    if not validate_trajectory(sc, Q_new, K=spec.K):
                        cands.append((Q_new, polish_amplitudes(spec, state.A, Q_new)))
                except (SolverError, InfeasibleProblemError) as exc:
                    warnings.append(f"trajectory block: {exc}")
            cur = L(state)
            for Qc, Bc in cands:
                val = penalized_objective(spec, state.A, state.Abar, Bc, Qc, eta)
                if val <= cur + ACCEPT_TOL * abs(cur):
                    state.Q, state.B, cur = Qc, Bc, val
            state.y = tight_y(spec, state.A, state.B, state.Q)
            now = L(state)
            state.trace.append(TraceRow(outer, inner, now, binary_violation(state.A, state.Abar),
                                        max_fractional(state.A), eta))
            if max_fractional(state.A) == 0.0:
                val = log_objective(spec, state.A, state.B, state.Q)
                if val < best[0]:
                    best = (val, state.A.copy(), state.B.copy(), state.Q.copy())
            # L is a log objective: a log-difference is the relative change of exp(L)
            if abs(np.expm1(now - prev)) <= eps1 or out_of_time():
                break
            prev = now
        if binary_violation(state.A, slack_update(state.A)) < eps2 or out_of_time():
            break
        eta *= s

    relaxed = log_objective(spec, state.A, state.B, state.Q)
    A_r, repaired = round_and_repair(spec, state.A, A_init)
    if repaired:
        warnings.append("rounded selection needed repair")
        log.warning("rounded selection needed repair")
    B_r = polish_amplitudes(spec, A_r, state.Q)
    val = log_objective(spec, A_r, B_r, state.Q)
    if best[0] < val:
        val, A_r, B_r, Q_r = best
    else:
        Q_r = state.Q
    Z = denoising_factors(spec, A_r, B_r, Q_r)
    sched = Schedule(A=A_r, B=B_r, Q=Q_r, Z=Z, label=label,
                     meta={"log_objective": val, "relaxed_log_objective": relaxed})
    return SolveResult(sched, state, val, relaxed, repaired, warnings, time.perf_counter() - t0)
