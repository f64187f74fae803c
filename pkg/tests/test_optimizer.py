import cvxpy as cp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from uavafl.bound import bound_from_g, g_values
from uavafl.errors import InfeasibleProblemError
from uavafl.optimizer import (
    SelectionBlock,
    build_problem,
    convex_solve,
    gp_transform,
    penalty,
    polish_amplitudes,
    round_and_repair,
    selector_matrix,
    slack_update,
    two_layer_solve,
)
from uavafl.optimizer.subproblems import (
    epsilon_linearization,
    optimal_scaled_zeta,
    penalized_objective,
    tight_y,
)
from uavafl.params import BoundParams
from uavafl.scenario import Scenario, ScenarioParams, generate_scenario, validate_trajectory


# -- penalty slack -----------------------------------------------------------

def test_slack_fixed_points_and_midpoint():
    assert slack_update([0.0, 1.0]).tolist() == [0.0, 1.0]
    assert slack_update(0.5) == pytest.approx(0.6)


@settings(max_examples=50, deadline=None)
@given(a=st.floats(0.0, 1.0))
def test_slack_is_stationary_point_of_penalty(a):
    abar = float(slack_update(a))
    h = 1e-6
    fd = (penalty([a], [abar + h]) - penalty([a], [abar - h])) / (2 * h)
    assert abs(fd) < 1e-6


# -- log-sum-exp recast --------------------------------------------------------

def test_selector_rows():
    C = selector_matrix(3)
    assert C.tolist() == [[1, 0, 0, 0, 1, 1],
                          [0, 1, 0, 0, 0, 1],
                          [0, 0, 1, 0, 0, 0]]


def test_single_slot_horizon_is_its_additive_term():
    p = BoundParams(alpha2=1e-4, S=1)
    gp = gp_transform(type("S", (), {"K": 1, "params": p})())
    pv, y = gp.tight([50.0])
    assert gp.objective(y) == pytest.approx(y[0])
    assert np.exp(y[0]) == pytest.approx(bound_from_g(np.array([50.0]), p, 0.0).asymptotic, rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_recast_equals_bound_at_tight_point(seed):
    rng = np.random.default_rng(seed)
    p = BoundParams(alpha2=rng.uniform(0, 1e-3), S=2)
    gp = gp_transform(type("S", (), {"K": 3, "params": p})())
    g = rng.uniform(0, 200, 3)
    _, y = gp.tight(g)
    assert gp.objective(y) == pytest.approx(bound_from_g(g, p, 0.0).log_asymptotic, rel=1e-9)
    assert gp.feasible(g, np.exp(y), y)


def test_raising_an_active_p_raises_objective():
    rng = np.random.default_rng(0)
    K = 5
    gp = gp_transform(type("S", (), {"K": K, "params": BoundParams(S=2)})())
    y = rng.normal(size=2 * K)
    base = gp.objective(y)
    for i in range(2 * K):
        bumped = y.copy()
        bumped[i] += 0.1
        # the first contraction factor only multiplies the initial gap
        if i == K:
            assert gp.objective(bumped) == base
        else:
            assert gp.objective(bumped) > base


# -- per-slot amplitude optimization ----------------------------------------

@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 6))
def test_scaled_zeta_matches_scalar_minimization(seed, n):
    rng = np.random.default_rng(seed)
    a = (rng.uniform(size=(n, 1)) < 0.7).astype(float)
    a[0] = 1.0
    x = 10.0 ** rng.uniform(-1, 1.5, (n, 1))
    z = optimal_scaled_zeta(a, x)[0]
    f = lambda t: float(np.sum(a[:, 0] * np.maximum(0.0, 1 - t * x[:, 0]) ** 2) + t * t)
    ref = minimize_scalar(f, bounds=(0.0, 2.0 / x.min()), method="bounded", options={"xatol": 1e-12})
    assert f(z) <= f(ref.x) + 1e-10
    assert z == pytest.approx(ref.x, abs=1e-6)


def test_single_device_below_uav_keeps_full_power():
    sc = Scenario.from_positions(np.array([[500.0, 500.0]]), ScenarioParams(K=4, qF_xy=(500.0, 500.0)))
    spec = build_problem(sc, BoundParams(S=1), 4)
    B = polish_amplitudes(spec, np.ones((1, 4)), np.tile(sc.q_F, (5, 1)))
    assert np.allclose(B, sc.b_max)


def test_polished_amplitudes_beat_full_power():
    sc = generate_scenario(4, "uniform", 4, ScenarioParams(K=6))
    spec = build_problem(sc, BoundParams(S=2), 6)
    A = np.ones((4, 6))
    Q = np.tile([500.0, 500.0, sc.H], (7, 1))
    B = polish_amplitudes(spec, A, Q)
    assert np.all(B <= sc.b_max + 1e-15)
    full = g_values(A, np.full((4, 6), sc.b_max), Q[1:], sc, spec.params)
    assert np.all(g_values(A, B, Q[1:], sc, spec.params) <= full + 1e-9)


# -- surrogate soundness ----------------------------------------------------

@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_linearization_value_gradient_and_underestimate(seed):
    rng = np.random.default_rng(seed)
    M = 4
    v = rng.uniform(0.1, 5.0, (M, 1))
    a0 = rng.uniform(0.05, 1.0, (M, 1))
    val, grad = epsilon_linearization(a0, v)
    eps = lambda a: float((a[:, 0] @ v[:, 0]) ** 2 / (a[:, 0] @ v[:, 0] ** 2 + 1))
    assert val[0] == pytest.approx(eps(a0), rel=1e-12)
    h = 1e-6
    fd = [(eps(a0 + h * e[:, None]) - eps(a0 - h * e[:, None])) / (2 * h) for e in np.eye(M)]
    assert np.allclose(grad[:, 0], fd, rtol=1e-5, atol=1e-8)
    a1 = rng.uniform(0.0, 1.0, (M, 1))
    assert val[0] + grad[:, 0] @ (a1 - a0)[:, 0] <= eps(a1) + 1e-9


def test_selection_surrogate_touches_true_objective():
    sc = generate_scenario(5, "uniform", 3, ScenarioParams(K=6))
    spec = build_problem(sc, BoundParams(alpha2=1e-4, S=3), 6)
    rng = np.random.default_rng(5)
    A = np.ones((3, 6)) * rng.uniform(0.4, 1.0, (3, 6))
    Abar = slack_update(A)
    Q = np.tile([400.0, 400.0, sc.H], (7, 1))
    B = np.full((3, 6), sc.b_max)
    y = tight_y(spec, A, B, Q)
    eta = 3.0
    blk = SelectionBlock(spec)
    blk.solve(A, Abar, B, Q, eta, y)  # loads the expansion point into the parameters
    g = g_values(A, B, Q[1:], sc, spec.params)
    blk.A.value, blk.y.value, blk.f.value = A, y, g
    blk.d.value = blk.r0.value + np.sum(blk.W.value * A, axis=0)
    surrogate = blk.problem.objective.value + np.sum(Abar**2) / eta
    assert surrogate == pytest.approx(penalized_objective(spec, A, Abar, B, Q, eta), rel=1e-9)
    # the expansion point is feasible for the surrogate
    assert max(float(np.max(c.violation())) for c in blk.problem.constraints) <= 1e-6


# -- problem construction -------------------------------------------------------

def test_busy_device_cannot_meet_tight_staleness():
    sc = Scenario.from_positions(np.array([[100.0, 100.0], [200.0, 100.0]]), ScenarioParams(K=8, compute_time=2))
    with pytest.raises(InfeasibleProblemError, match="device 0"):
        build_problem(sc, BoundParams(S=1), 8)


def test_horizon_shorter_than_staleness_rejected():
    sc = Scenario.from_positions(np.array([[100.0, 100.0]]), ScenarioParams(K=4))
    with pytest.raises(InfeasibleProblemError):
        build_problem(sc, BoundParams(S=5), 4)


def test_large_instance_builds():
    sc = generate_scenario(1, "uniform", 20, ScenarioParams(K=250, compute_time=3))
    spec = build_problem(sc, BoundParams(S=50), 250, cyclic=True)
    assert spec.stale_windows.shape == (250, 250)
    assert set(spec.busy_windows) == {3}


def test_single_device_is_always_selected():
    sc = Scenario.from_positions(np.array([[300.0, 300.0]]), ScenarioParams(K=5))
    spec = build_problem(sc, BoundParams(S=1), 5)
    res = two_layer_solve(spec, max_outer=2, max_inner=2)
    assert res.schedule.A.tolist() == [[1.0] * 5]
    assert validate_trajectory(sc, res.schedule.Q, K=5) == []
    g = g_values(res.schedule.A, res.schedule.B, res.schedule.Q[1:], sc, spec.params)
    assert res.log_objective == pytest.approx(bound_from_g(g, spec.params, 0.0).log_asymptotic, rel=1e-12)


# -- rounding ------------------------------------------------------------------

def test_rounding_keeps_a_feasible_binary_schedule():
    sc = Scenario.from_positions(np.array([[0.0, 0.0], [50.0, 0.0]]), ScenarioParams(K=6, compute_time=1))
    spec = build_problem(sc, BoundParams(S=3), 6)
    A = np.array([[1, 0, 1, 0, 1, 0], [0, 1, 0, 1, 0, 1]], float)
    R, repaired = round_and_repair(spec, A, A)
    assert not repaired and np.array_equal(R, A)


def test_rounding_repairs_a_starved_window():
    sc = Scenario.from_positions(np.array([[0.0, 0.0], [50.0, 0.0]]), ScenarioParams(K=6, compute_time=1))
    spec = build_problem(sc, BoundParams(S=3), 6)
    A = np.array([[0.9, 0.2, 0.1, 0.4, 0.1, 0.7], [0.1, 0.8, 0.0, 0.3, 0.9, 0.0]])
    fallback = np.array([[1, 0, 1, 0, 1, 0], [0, 1, 0, 1, 0, 1]], float)
    R, repaired = round_and_repair(spec, A, fallback)
    assert repaired
    assert spec.check(R) == []
    # the largest fractional entry of the starved window is the one switched on
    assert R[0, 3] == 1.0


# -- convex solver contract ------------------------------------------------------

def test_unconstrained_quadratic():
    x = cp.Variable(3)
    target = np.array([1.0, -2.0, 0.5])
    sol = convex_solve(cp.Problem(cp.Minimize(cp.sum_squares(x - target))), {"x": x})
    assert np.allclose(sol.variables["x"], target, atol=1e-6)
    assert sol.status == cp.OPTIMAL


def test_log_sum_exp_over_box_matches_grid():
    C = np.array([[1.0, 0.5], [-0.3, 1.0], [0.2, -1.0]])
    lo, hi = np.array([-1.0, -0.5]), np.array([0.8, 1.2])
    x = cp.Variable(2)
    obj = cp.log_sum_exp(C @ x) + 0.3 * cp.sum_squares(x - [0.5, 0.2])
    sol = convex_solve(cp.Problem(cp.Minimize(obj), [x >= lo, x <= hi]), {"x": x})
    g1, g2 = np.meshgrid(np.linspace(lo[0], hi[0], 901), np.linspace(lo[1], hi[1], 851), indexing="ij")
    pts = np.stack([g1.ravel(), g2.ravel()], axis=1)
    vals = np.log(np.exp(pts @ C.T).sum(axis=1)) + 0.3 * np.sum((pts - [0.5, 0.2]) ** 2, axis=1)
    assert sol.objective == pytest.approx(vals.min(), abs=1e-4)
    assert np.allclose(sol.variables["x"], pts[np.argmin(vals)], atol=5e-3)
    assert sol.violation <= 1e-8


def test_infeasible_affine_system_reported():
    x = cp.Variable(2)
    with pytest.raises(InfeasibleProblemError):
        convex_solve(cp.Problem(cp.Minimize(cp.sum(x)), [x >= 1, cp.sum(x) <= 1]))


def test_solve_is_deterministic():
    x = cp.Variable(2)
    prob = lambda: cp.Problem(cp.Minimize(cp.log_sum_exp(x) + cp.sum_squares(x)), [x >= -1])
    a = convex_solve(prob(), {"x": x}).variables["x"]
    b = convex_solve(prob(), {"x": x}).variables["x"]
    assert np.array_equal(a, b)


# -- two-layer loop ---------------------------------------------------------------

def test_tiny_instance_trace_and_feasibility():
    sc = generate_scenario(2, "uniform", 2, ScenarioParams(K=4)).with_compute_times(0)
    spec = build_problem(sc, BoundParams(S=2), 4)
    res = two_layer_solve(spec, fix_trajectory=True, multi_start=False)
    assert spec.check(res.schedule.A) == []
    tr = res.state.trace
    for a, b in zip(tr, tr[1:]):
        if a.outer == b.outer and b.inner > 0:
            assert b.objective <= a.objective + 1e-6
    assert res.state.p.shape == (8,)


def test_bad_penalty_schedule_rejected():
    sc = Scenario.from_positions(np.array([[300.0, 300.0]]), ScenarioParams(K=3))
    spec = build_problem(sc, BoundParams(S=1), 3)
    with pytest.raises(ValueError):
        two_layer_solve(spec, s=1.5)
