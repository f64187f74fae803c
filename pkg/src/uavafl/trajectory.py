"""Reference paths and their projection onto the UAV mechanics constraints."""

from __future__ import annotations

import cvxpy as cp
import numpy as np

from uavafl.errors import InfeasibleProblemError
from uavafl.scenario import Scenario, validate_trajectory

MARGIN = 1.0 - 1e-5
UNIT = 100.0  # metres per solver length unit


def mechanics_constraints(qxy, scenario: Scenario, K: int, qF_xy, margin: float = MARGIN,
                          unit: float = UNIT) -> list:
    """Speed, acceleration and endpoint constraints on (K + 1, 2) positions in ``unit``s."""
    dt = scenario.delta_t
    cons = [qxy[0] == qF_xy / unit, qxy[K] == qF_xy / unit]
    if K >= 1:
        cons.append(cp.norm(qxy[1:] - qxy[:-1], 2, axis=1) <= margin * scenario.v_max * dt / unit)
    if K >= 2:
        acc = qxy[2:] - 2 * qxy[1:-1] + qxy[:-2]
        cons.append(cp.norm(acc, 2, axis=1) <= margin * scenario.a_max * dt**2 / unit)
    return cons


def finalize(scenario: Scenario, qxy: np.ndarray) -> np.ndarray:
    """Lift horizontal positions to altitude H with exact endpoints."""
    K = qxy.shape[0] - 1
    Q = np.column_stack([qxy, np.full(K + 1, scenario.H)])
    Q[0] = scenario.q_F
    Q[K] = scenario.q_F
    return Q


def project_path(scenario: Scenario, reference: np.ndarray, margin: float = MARGIN) -> np.ndarray:
    """Closest trajectory (least squares) to a horizontal reference that
    satisfies speed, acceleration and endpoint limits; returns (K + 1, 3)."""
    ref = np.asarray(reference, float)[:, :2]
    K = ref.shape[0] - 1
    q = cp.Variable((K + 1, 2))
    cons = mechanics_constraints(q, scenario, K, scenario.q_F[:2], margin)
    prob = cp.Problem(cp.Minimize(cp.sum_squares(q - ref / UNIT)), cons)
    prob.solve(solver=cp.CLARABEL)
    if prob.status not in ("optimal", "optimal_inaccurate") or q.value is None:
        raise InfeasibleProblemError(f"no feasible path within {K} slots ({prob.status})")
    Q = finalize(scenario, q.value * UNIT)
    if validate_trajectory(scenario, Q, K=K):
        raise InfeasibleProblemError("projected path violates mechanics limits")
    return Q


def polyline_reference(waypoints: np.ndarray, K: int) -> np.ndarray:
    """K + 1 points spaced uniformly in arc length along a closed polyline."""
    w = np.asarray(waypoints, float)[:, :2]
    seg = np.linalg.norm(np.diff(w, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    if s[-1] == 0.0:
        return np.tile(w[0], (K + 1, 1))
    t = np.linspace(0.0, s[-1], K + 1)
    return np.column_stack([np.interp(t, s, w[:, 0]), np.interp(t, s, w[:, 1])])


def circle_radius(scenario: Scenario, centre) -> float:
    """Least-squares radius: mean horizontal distance of devices from ``centre``."""
    w = scenario.positions[:, :2]
    return float(np.mean(np.linalg.norm(w - np.asarray(centre, float)[:2], axis=1)))


def circle_reference(scenario: Scenario, K: int, centre, radius: float,
                     speed: float | None = None) -> np.ndarray:
    """Fly in to the circle, loop around at ``speed``, fly back out.

    Transit legs run at 80% of the top speed; the loop covers the remaining
    slots at the requested speed (or slower when fewer slots remain).
    """
    c = np.asarray(centre, float)[:2]
    qF = scenario.q_F[:2]
    v_cap = scenario.v_max if speed is None else speed
    if radius > 0:
        v_cap = min(v_cap, np.sqrt(scenario.a_max * radius))
    off = qF - c
    phi0 = np.arctan2(off[1], off[0]) if np.linalg.norm(off) > 0 else 0.0
    entry = c + radius * np.array([np.cos(phi0), np.sin(phi0)])
    dist = float(np.linalg.norm(entry - qF))
    dt = scenario.delta_t
    n_in = int(np.ceil(dist / (0.8 * scenario.v_max * dt))) + 2 if dist > 0 else 0
    n_loop = K - 2 * n_in
    if n_loop < 1:
        raise InfeasibleProblemError(f"horizon of {K} slots too short to reach the circle")
    pts = [qF + (entry - qF) * i / max(n_in, 1) for i in range(n_in)]
    circumference = 2 * np.pi * radius
    if radius > 0:
        laps = max(1, int(np.floor(v_cap * n_loop * dt / circumference)))
        omega = min(2 * np.pi * laps / n_loop, v_cap * dt / radius)
    else:
        omega = 0.0
    for i in range(n_loop + 1):
        a = phi0 + omega * i
        pts.append(c + radius * np.array([np.cos(a), np.sin(a)]))
    last = pts[-1]
    pts += [last + (qF - last) * i / max(n_in, 1) for i in range(1, n_in + 1)]
    ref = np.array(pts)[: K + 1]
    if ref.shape[0] < K + 1:
        ref = np.vstack([ref, np.tile(qF, (K + 1 - ref.shape[0], 1))])
    ref[-1] = qF
    return ref


def circle_trajectory(scenario: Scenario, K: int, centre=None, radius: float | None = None,
                      speed: float | None = None) -> np.ndarray:
    centre = np.array([scenario.area_side / 2, scenario.area_side / 2]) if centre is None else centre
    radius = circle_radius(scenario, centre) if radius is None else radius
    return project_path(scenario, circle_reference(scenario, K, centre, radius, speed))
