"""Convex subproblem solver contract (interior point via CLARABEL)."""

from __future__ import annotations

import warnings
import weakref
from dataclasses import dataclass, field

import cvxpy as cp
import numpy as np

from uavafl.errors import InfeasibleProblemError, SolverError

FEAS_TOL = 1e-8
RESIDUAL_TOL = 1e-6


@dataclass
class SubproblemSolution:
    variables: dict
    objective: float
    residual: float
    violation: float
    status: str
    diagnostics: dict = field(default_factory=dict)


def _kkt_residual(prob: cp.Problem) -> float:
    """Complementary slackness gap sum |lambda_i * s_i| over inequality constraints."""
    r = 0.0
    for c in prob.constraints:
        if c.dual_value is None:
            continue
        if isinstance(c, cp.constraints.Inequality):
            s = np.asarray(c.expr.value if hasattr(c, "expr") else 0.0)
            lam = np.asarray(c.dual_value)
            r = max(r, float(np.max(np.abs(lam * np.minimum(s, 0.0)))) if lam.size else 0.0)
    return r


RETRY_SETTINGS = (
    (cp.CLARABEL, {}),
    (cp.CLARABEL, {"tol_gap_abs": 1e-7, "tol_gap_rel": 1e-7, "tol_feas": 1e-7, "max_iter": 400,
                   "static_regularization_constant": 1e-7}),
    # near-optimal stalls are common; the caller's descent safeguard vets the result
    (cp.CLARABEL, {"tol_gap_abs": 1e-5, "tol_gap_rel": 1e-5, "tol_feas": 1e-6, "max_iter": 400,
                   "tol_ktratio": 1e-4, "static_regularization_constant": 1e-6}),
    (cp.SCS, {"eps_abs": 1e-6, "eps_rel": 1e-6, "max_iters": 5000}),
)


_CLONES: "weakref.WeakKeyDictionary[cp.Problem, dict]" = weakref.WeakKeyDictionary()


def _for_solver(prob: cp.Problem, solver: str) -> cp.Problem:
    """``prob`` itself for the primary solver, else a clone sharing its variables.

    cvxpy keeps one compiled form per problem and drops it when the solver
    changes, so fallbacks get their own problem object to keep both caches warm.
    """
    if solver == RETRY_SETTINGS[0][0]:
        return prob
    clones = _CLONES.setdefault(prob, {})
    if solver not in clones:
        clones[solver] = cp.Problem(prob.objective, prob.constraints)
    return clones[solver]


def _solve_once(prob: cp.Problem, solver: str, settings: dict) -> cp.Problem:
    target = _for_solver(prob, solver)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        target.solve(solver=solver, **settings)
    return target


def convex_solve(prob: cp.Problem, variables: dict | None = None, max_iter: int = 200,
                 retry: bool = True) -> SubproblemSolution:
    """Solve ``prob``; raise InfeasibleProblemError on a certificate and
    SolverError when every attempt stops without an (inaccurate) optimum.

    Attempts: CLARABEL at default and two looser tolerance levels, then SCS.
    """
    attempts = RETRY_SETTINGS if retry else RETRY_SETTINGS[:1]
    errors = []
    used = prob
    for solver, extra in attempts:
        settings = dict(extra)
        if solver == cp.CLARABEL:
            settings.setdefault("max_iter", max_iter)
        try:
            used = _solve_once(prob, solver, settings)
        except cp.error.SolverError as exc:
            errors.append(f"{solver}: {exc}")
            continue
        if used.status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
            raise InfeasibleProblemError(f"subproblem infeasible ({used.status})")
        if used.status in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE) and used.value is not None:
            break
        errors.append(f"{solver}: status {used.status}")
    else:
        raise SolverError("convex solve failed: " + "; ".join(errors), {"attempts": errors})
    prob = used
    violation = max((float(np.max(c.violation())) for c in prob.constraints), default=0.0)
    stats = prob.solver_stats
    diag = {"status": prob.status, "solver": solver, "iterations": getattr(stats, "num_iters", None),
            "solve_time": getattr(stats, "solve_time", None), "violation": violation,
            "failed_attempts": errors}
    vals = {k: (None if v.value is None else np.array(v.value)) for k, v in (variables or {}).items()}
    return SubproblemSolution(vals, float(prob.value), _kkt_residual(prob), violation, prob.status, diag)
