"""Benchmark service strategies and the optimized scheme, as runnable plans."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from uavafl.errors import ConfigurationError, InfeasibleProblemError, UavAflError
from uavafl.optimizer import ProblemSpec, build_problem, two_layer_solve
from uavafl.params import BoundParams
from uavafl.optimizer.starts import best_hover_point
from uavafl.scenario import Scenario, distances
from uavafl.schedule import Schedule
from uavafl.tour import short_tour
from uavafl.trajectory import circle_radius, circle_trajectory, project_path

KINDS = ("uav_afl", "error_free", "cf", "sfhf", "hga", "fafl")
D_THR = 250.0


@dataclass
class Plan:
    """What a strategy hands to the simulator.

    ``schedule`` drives the slot-level engine; ``hierarchical`` switches to
    epoch-buffered aggregation over ``schedule.Q`` instead.
    """

    kind: str
    schedule: Schedule
    hierarchical: bool = False
    runtime: float = 0.0
    info: dict = field(default_factory=dict)


# -- CF ----------------------------------------------------------------------

def cf_radius(scenario: Scenario, centre=None) -> float:
    """Least-squares circle radius about ``centre`` (area centre by default)."""
    centre = _area_centre(scenario) if centre is None else centre
    return circle_radius(scenario, centre)


def cf_trajectory(scenario: Scenario, K: int) -> np.ndarray:
    return circle_trajectory(scenario, K, centre=_area_centre(scenario), radius=cf_radius(scenario))


def _area_centre(scenario: Scenario) -> np.ndarray:
    return np.full(2, scenario.area_side / 2.0)


def cf_plan(spec: ProblemSpec, **solver_kw) -> Plan:
    t0 = time.perf_counter()
    Q = cf_trajectory(spec.scenario, spec.K)
    res = two_layer_solve(spec, init={"Q": Q}, fix_trajectory=True, label="cf", **solver_kw)
    return Plan("cf", res.schedule, runtime=time.perf_counter() - t0,
                info={"log_objective": res.log_objective, "radius": cf_radius(spec.scenario)})


def uav_afl_plan(spec: ProblemSpec, start: Schedule | None = None, **solver_kw) -> tuple[Plan, object]:
    """Full optimization; ``start`` (typically the CF result) joins the candidate starts."""
    t0 = time.perf_counter()
    extra = None if start is None else [{"Q": start.Q, "A": start.A, "B": start.B, "name": "cf"}]
    res = two_layer_solve(spec, extra_starts=extra, label="uav_afl", **solver_kw)
    plan = Plan("uav_afl", res.schedule, runtime=time.perf_counter() - t0,
                info={"log_objective": res.log_objective, "repaired": res.repaired,
                      "warnings": list(res.warnings)})
    return plan, res


def error_free_plan(uav_afl: Plan) -> Plan:
    return Plan("error_free", uav_afl.schedule.with_(error_free=True, label="error_free", meta={}))


# -- SFHF --------------------------------------------------------------------

def sfhf_point(scenario: Scenario, pitch: float = 50.0) -> tuple[np.ndarray, np.ndarray, float]:
    """Hover point and amplitudes minimizing the all-device gap M - eps."""
    return best_hover_point(scenario, pitch)


def synchronous_rounds(K: int, period: int) -> np.ndarray:
    """0-based round slots every ``period`` slots, spaced so they also repeat cyclically."""
    n = max(1, K // period)
    return (np.arange(n) * K) // n


def sfhf_plan(scenario: Scenario, S: int, n_slots: int, pitch: float = 50.0) -> Plan:
    """Fly to the hover point, run synchronous all-device rounds, fly home at the end.

    The cycle spans the whole training horizon, so the UAV hovers throughout.
    """
    t0 = time.perf_counter()
    q, b, gap = sfhf_point(scenario, pitch)
    Q = _hover_path(scenario, q, n_slots)
    period = int(scenario.compute_times.max()) + 1
    A = np.zeros((scenario.M, n_slots))
    A[:, synchronous_rounds(n_slots, period)] = 1.0
    B = np.tile(b[:, None], (1, n_slots))
    # rounds wait for the slowest device, which may exceed the staleness bound
    relaxed = ("staleness",) if period > S else ()
    sched = Schedule(A=A, B=B, Q=Q, label="sfhf", relaxed=relaxed, meta={"hover": q.tolist(), "gap": gap})
    return Plan("sfhf", sched, runtime=time.perf_counter() - t0, info={"hover": q.tolist(), "gap": gap})


def _hover_path(scenario: Scenario, q: np.ndarray, K: int) -> np.ndarray:
    qF = scenario.q_F[:2]
    dist = float(np.linalg.norm(q[:2] - qF))
    n_in = int(np.ceil(dist / (0.8 * scenario.v_max * scenario.delta_t))) + 2 if dist > 0 else 0
    if 2 * n_in >= K:
        raise InfeasibleProblemError(f"horizon of {K} slots too short to reach the hover point")
    ramp = [qF + (q[:2] - qF) * i / max(n_in, 1) for i in range(n_in)]
    ref = np.vstack(ramp + [np.tile(q[:2], (K + 1 - 2 * n_in, 1))] + ramp[::-1]) if n_in else \
        np.tile(q[:2], (K + 1, 1))
    return project_path(scenario, ref)


# -- HGA ---------------------------------------------------------------------

def hga_plan(scenario: Scenario, K: int, d_thr: float = D_THR) -> Plan:
    """Tour the CF circle, repaired toward any device the circle never brings within ``d_thr``."""
    t0 = time.perf_counter()
    repaired = False
    try:
        Q = cf_trajectory(scenario, K)
    except InfeasibleProblemError:
        Q = None
    if Q is None or not covers_all(scenario, Q, d_thr):
        Q = tour_trajectory(scenario, tsp_tour(scenario))
        repaired = True
    A = np.zeros((scenario.M, Q.shape[0] - 1))
    sched = Schedule(A=A, B=np.full_like(A, scenario.b_max), Q=Q, label="hga",
                     relaxed=("staleness", "selection"))
    return Plan("hga", sched, hierarchical=True, runtime=time.perf_counter() - t0,
                info={"tour_repaired": repaired, "d_thr": d_thr})


def covers_all(scenario: Scenario, Q: np.ndarray, d_thr: float) -> bool:
    return bool(np.all((distances(scenario, Q[1:]) <= d_thr).any(axis=1)))


# -- FAFL --------------------------------------------------------------------

def tsp_tour(scenario: Scenario) -> list[int]:
    """Device visiting order from the dispatch point (device indices only)."""
    pts = np.vstack([scenario.q_F[:2], scenario.positions[:, :2]])
    tour = short_tour(pts, 0)
    return [i - 1 for i in tour[1:-1]]


def tour_trajectory(scenario: Scenario, order, dwell: int = 1) -> np.ndarray:
    """Fly q_F -> devices in ``order`` -> q_F, pausing ``dwell`` slots above each."""
    qF = scenario.q_F[:2]
    stops = [qF] + [scenario.positions[m, :2] for m in order] + [qF]
    step = 0.7 * scenario.v_max * scenario.delta_t
    ref = [qF]
    for a, b in zip(stops[:-1], stops[1:]):
        n = max(2, int(np.ceil(np.linalg.norm(b - a) / step)) + 2)
        ref += [a + (b - a) * (i / n) for i in range(1, n + 1)]
        ref += [b] * dwell
    ref = np.array(ref)
    for extra in range(0, 40, 4):
        padded = np.vstack([ref, np.tile(qF, (extra, 1))]) if extra else ref
        try:
            return project_path(scenario, _ease(padded))
        except InfeasibleProblemError:
            continue
    raise InfeasibleProblemError("could not fit the tour to the mechanics limits")


def _ease(ref: np.ndarray) -> np.ndarray:
    # light smoothing so the projection does not have to absorb sharp corners alone
    out = ref.copy()
    out[1:-1] = 0.25 * ref[:-2] + 0.5 * ref[1:-1] + 0.25 * ref[2:]
    return out


def fafl_plan(scenario: Scenario) -> Plan:
    """One device per visit along a TSP tour; exact (error-free) uploads."""
    t0 = time.perf_counter()
    order = tsp_tour(scenario)
    Q = tour_trajectory(scenario, order)
    K = Q.shape[0] - 1
    d = distances(scenario, Q[1:])
    A = np.zeros((scenario.M, K))
    used: set[int] = set()
    # visits happen in order, so take each device's closest slot after the previous visit
    lo = 0
    for m in order:
        k = lo + int(np.argmin(d[m, lo:]))
        while k in used:
            k += 1
        A[m, k] = 1.0
        used.add(k)
        lo = k + 1 if k + 1 < K else k
    sched = Schedule(A=A, B=np.full_like(A, scenario.b_max), Q=Q, label="fafl", error_free=True,
                     relaxed=("staleness",))
    return Plan("fafl", sched, runtime=time.perf_counter() - t0,
                info={"tour": [int(m) for m in order], "tour_slots": K})


def make_plans(kinds, scenario: Scenario, params: BoundParams, K: int, n_slots: int,
               solver_kw: dict | None = None) -> dict:
    """Plans for the requested strategy kinds over a cycle of ``K`` slots.

    The CF solve is shared with uav_afl as an extra start. Infeasible
    strategies are reported as exceptions in the returned mapping.
    """
    solver_kw = solver_kw or {}
    bad = [k for k in kinds if k not in KINDS]
    if bad:
        raise ConfigurationError(f"unknown strategies {bad}; choose from {KINDS}")
    out: dict[str, Plan | Exception] = {}
    optimized = {"cf", "uav_afl", "error_free"} & set(kinds)
    spec: ProblemSpec | Exception | None = None
    if optimized:
        try:
            spec = build_problem(scenario, params, K, cyclic=True)
        except UavAflError as exc:
            spec = exc
    cf: Plan | Exception | None = spec if isinstance(spec, Exception) else None
    if optimized and cf is None:
        try:
            cf = cf_plan(spec, **solver_kw)
        except UavAflError as exc:
            cf = exc
    if "cf" in kinds:
        out["cf"] = cf
    if {"uav_afl", "error_free"} & set(kinds):
        if isinstance(spec, Exception):
            plan = spec
        else:
            try:
                plan, _ = uav_afl_plan(spec, cf.schedule if isinstance(cf, Plan) else None, **solver_kw)
            except UavAflError as exc:
                plan = exc
        if "uav_afl" in kinds:
            out["uav_afl"] = plan
        if "error_free" in kinds:
            out["error_free"] = plan if isinstance(plan, Exception) else error_free_plan(plan)
    builders = {
        "sfhf": lambda: sfhf_plan(scenario, params.S, n_slots),
        "hga": lambda: hga_plan(scenario, K),
        "fafl": lambda: fafl_plan(scenario),
    }
    for k in kinds:
        if k in builders:
            try:
                out[k] = builders[k]()
            except UavAflError as exc:
                out[k] = exc
    return {k: out[k] for k in kinds}
