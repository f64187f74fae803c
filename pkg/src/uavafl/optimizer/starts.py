"""Starting points for the alternating scheme.

The scheme is local, so it is seeded from several trajectory families and
the best one (by the true objective with fitted selection and amplitudes) is
kept: the circle tour, fly-hover-fly at the best all-device hover point,
closed device tours shrunk toward that point, and shuttles that dwell at
device-group centroids with a lap period tied to the staleness bound.
"""

from __future__ import annotations

import numpy as np
from scipy.cluster.vq import kmeans2
from scipy.optimize import minimize

from uavafl.errors import InfeasibleProblemError
from uavafl.optimizer.problem import ProblemSpec, initial_selection
from uavafl.optimizer.subproblems import log_objective, optimal_scaled_zeta, polish_amplitudes
from uavafl.scenario import Scenario, channel_magnitudes
from uavafl.tour import short_tour
from uavafl.trajectory import circle_trajectory, project_path

LOOP_SCALES = (0.25, 0.5, 0.75, 1.0)


def hover_gap(scenario: Scenario, q_xy) -> tuple[float, np.ndarray]:
    """(M - eps, amplitudes) with every device transmitting to hover point ``q_xy``.

    The amplitudes are the exact minimizers of the gap at that point.
    """
    q = np.array([q_xy[0], q_xy[1], scenario.H], float)[None, :]
    unit = np.sqrt(scenario.noise_power / 2.0)
    h = channel_magnitudes(scenario, q) / unit
    bmax = scenario.b_max
    z = optimal_scaled_zeta(np.ones_like(h), h * bmax)
    with np.errstate(divide="ignore"):
        b = np.where(z > 0, np.minimum(1.0 / (z * h), bmax), bmax)[:, 0]
    x = h[:, 0] * b
    eps = x.sum() ** 2 / (np.sum(x**2) + 1.0)
    return float(scenario.M - eps), b


def best_hover_point(scenario: Scenario, pitch: float = 50.0, refine: int = 5):
    """Grid search at ``pitch`` then Nelder-Mead from the best ``refine`` cells.

    Returns ``(q, amplitudes, gap)`` with ``q`` at altitude H.
    """
    side = scenario.area_side
    ticks = np.arange(0.0, side + 1e-9, pitch)
    grid = [(x, y) for x in ticks for y in ticks]
    vals = np.array([hover_gap(scenario, p)[0] for p in grid])
    best_q, best_v = np.array(grid[int(np.argmin(vals))], float), float(vals.min())
    for i in np.argsort(vals, kind="stable")[:refine]:
        r = minimize(lambda p: hover_gap(scenario, np.clip(p, 0, side))[0], np.array(grid[i], float),
                     method="Nelder-Mead", options={"xatol": 1e-3, "fatol": 1e-12, "maxiter": 400})
        q = np.clip(r.x, 0, side)
        v = hover_gap(scenario, q)[0]
        if v < best_v:
            best_q, best_v = q, v
    gap, b = hover_gap(scenario, best_q)
    return np.array([best_q[0], best_q[1], scenario.H]), b, gap


def loop_reference(scenario: Scenario, K: int, loop_xy: np.ndarray, speed_factor: float = 0.8) -> np.ndarray:
    """Fly in to the first loop vertex, circulate the closed polygon, fly home.

    A single-point loop is a hover. Returns (K + 1, 2) horizontal positions.
    """
    qF = scenario.q_F[:2]
    loop = np.vstack([loop_xy, loop_xy[:1]])
    step = speed_factor * scenario.v_max * scenario.delta_t
    entry = loop[0]
    dist = float(np.linalg.norm(entry - qF))
    n_in = int(np.ceil(dist / step)) + 2 if dist > 0 else 0
    n_loop = K - 2 * n_in
    if n_loop < 1:
        raise InfeasibleProblemError(f"horizon of {K} slots too short to reach the loop")
    seg = np.linalg.norm(np.diff(loop, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    if s[-1] > 0:
        laps = max(1, int(np.floor(step * n_loop / s[-1])))
        t = np.linspace(0.0, laps * s[-1], n_loop + 1) % s[-1]
    else:
        t = np.zeros(n_loop + 1)
    pts = np.column_stack([np.interp(t, s, loop[:, 0]), np.interp(t, s, loop[:, 1])])
    ramp_in = [qF + (entry - qF) * i / max(n_in, 1) for i in range(n_in)]
    ramp_out = [pts[-1] + (qF - pts[-1]) * i / max(n_in, 1) for i in range(1, n_in + 1)]
    return np.vstack(ramp_in + [pts] + ramp_out)[: K + 1]


def _leg(a, b, step: float) -> int:
    return int(np.ceil(np.linalg.norm(b - a) / step)) + 2


def shuttle_reference(scenario: Scenario, K: int, stops: np.ndarray, period: int,
                      speed_factor: float = 0.8) -> np.ndarray:
    """Fly in, then cycle through ``stops`` once every ``period`` slots, dwelling
    at each, and fly home. Returns (K + 1, 2) horizontal positions."""
    qF = scenario.q_F[:2]
    step = speed_factor * scenario.v_max * scenario.delta_t
    n = len(stops)
    moves = [_leg(stops[i], stops[(i + 1) % n], step) for i in range(n)]
    spare = period - sum(moves)
    if spare < n:
        raise InfeasibleProblemError(f"stops cannot be toured in {period} slots")
    dwell = [spare // n + (1 if i < spare % n else 0) for i in range(n)]
    n_in = _leg(qF, stops[0], step)
    path = [qF + (stops[0] - qF) * i / n_in for i in range(n_in)]
    i = 0
    while len(path) < K + 1 - n_in:
        a, b = stops[i % n], stops[(i + 1) % n]
        path += [a] * dwell[i % n]
        path += [a + (b - a) * j / moves[i % n] for j in range(moves[i % n])]
        i += 1
    path = path[: K + 1 - n_in]
    if len(path) < 2:
        raise InfeasibleProblemError(f"horizon of {K} slots too short for a shuttle")
    last = path[-1]
    path += [last + (qF - last) * j / n_in for j in range(1, n_in + 1)]
    return np.array(path)


def device_groups(scenario: Scenario, count: int) -> np.ndarray:
    """``count`` k-means centroids of the device positions, in short-tour order."""
    xy = scenario.positions[:, :2]
    centres, _ = kmeans2(xy, count, seed=np.random.default_rng(0), minit="++")
    order = short_tour(centres, 0)[:-1]
    return centres[order]


def candidate_trajectories(spec: ProblemSpec) -> list[tuple[str, np.ndarray]]:
    """Named feasible trajectories; infeasible families are skipped."""
    sc, K = spec.scenario, spec.K
    out = []
    try:
        out.append(("circle", circle_trajectory(sc, K)))
    except InfeasibleProblemError:
        pass
    q, _, _ = best_hover_point(sc)
    order = short_tour(np.vstack([q[:2], sc.positions[:, :2]]), 0)
    devices = sc.positions[[i - 1 for i in order[1:-1]], :2]
    loops = [("hover", q[None, :2])]
    loops += [(f"loop{scale:g}", q[:2] + scale * (devices - q[:2])) for scale in LOOP_SCALES]
    for name, loop in loops:
        try:
            out.append((name, project_path(sc, loop_reference(sc, K, loop))))
        except InfeasibleProblemError:
            continue
    S = spec.params.S
    for count in range(2, min(4, sc.M) + 1):
        stops = device_groups(sc, count)
        for period in sorted({S, max(1, S // 2)}):
            try:
                ref = shuttle_reference(sc, K, stops, period)
                out.append((f"shuttle{count}x{period}", project_path(sc, ref)))
            except InfeasibleProblemError:
                continue
    if not out:
        out.append(("dispatch", np.tile(sc.q_F, (K + 1, 1))))
    return out


def fitted_start(spec: ProblemSpec, Q: np.ndarray) -> dict:
    """Selection and amplitudes fitted to trajectory ``Q``, with the objective."""
    A = initial_selection(spec, Q, lambda a: log_objective(spec, a, polish_amplitudes(spec, a, Q), Q))
    B = polish_amplitudes(spec, A, Q)
    return {"Q": Q, "A": A, "B": B, "objective": log_objective(spec, A, B, Q)}


def best_start(spec: ProblemSpec, extra: list[dict] | None = None) -> dict:
    """Lowest-objective start among the trajectory families and ``extra`` starts.

    Each entry of ``extra`` must hold feasible ``Q``, ``A`` and ``B``.
    """
    starts = []
    for name, Q in candidate_trajectories(spec):
        st = fitted_start(spec, Q)
        st["name"] = name
        starts.append(st)
    for i, st in enumerate(extra or []):
        st = dict(st)
        st.setdefault("name", f"given{i}")
        st["objective"] = log_objective(spec, st["A"], st["B"], st["Q"])
        starts.append(st)
    return min(starts, key=lambda st: st["objective"])
