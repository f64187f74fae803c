import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uavafl.bound import (
    additive,
    asymptotic_objective,
    bound_from_g,
    contraction,
    e_a_bound,
    e_d_bound,
    finite_horizon_bound,
    g_value,
    g_values,
    log_asymptotic_objective,
    past_window_sums,
    schedule_g_values,
)
from uavafl.errors import SingularityError
from uavafl.params import BoundParams
from uavafl.scenario import Scenario, ScenarioParams, generate_scenario
from uavafl.schedule import Schedule


def g_by_hand(A, B, Q, sc, S):
    """Per-slot g written out with plain loops, slot by slot and device by device."""
    M, K = len(A), len(A[0])
    out = []
    for k in range(K):
        n_k = sum(A[m][k] for m in range(M))
        total = 18.0 * S * S + 24.0 * ((M - n_k) / M) ** 2
        window = 0.0
        for j in range(max(0, k - S), k + 1):
            num = 0.0
            den = sc.noise_power / 2.0
            n_j = 0.0
            for m in range(M):
                w = sc.devices[m].position
                d = math.sqrt(sum((Q[j][i] - w[i]) ** 2 for i in range(3)))
                num += A[m][j] * math.sqrt(sc.g0) / d * B[m][j]
                den += A[m][j] * sc.g0 / d**2 * B[m][j] ** 2
                n_j += A[m][j]
            window += n_j - num * num / den
        out.append(total + 18.0 * S * window)
    return out


def recursion_by_hand(g, params, gap0):
    """Step-by-step bound recursion: gap_{k+1} = rho_k gap_k + add_k."""
    gap = gap0
    for gk in g:
        rho = 1 - params.mu / params.L * (1 - gk * params.alpha2)
        add = (gk * (params.delta**2 + params.alpha1) + 6 * params.delta**2) / (2 * params.L)
        gap = rho * gap + add
    return gap


@pytest.fixture
def pair():
    sc = Scenario.from_positions(np.array([[100.0, 200.0], [400.0, 50.0]]), ScenarioParams(K=4))
    return sc


def test_trivial_g_values(pair):
    Q = np.array([[250.0, 125.0, 100.0]])
    full = np.ones((2, 1))
    B = np.full((2, 1), 0.2)
    p = BoundParams(S=1)
    assert g_value(full, B, Q, pair, p, S=0) == pytest.approx(0.0, abs=1e-12)
    assert g_value(np.zeros((2, 1)), B, Q, pair, p, S=0) == pytest.approx(24.0)


def test_two_device_window_matches_hand_transcription(pair):
    rng = np.random.default_rng(0)
    p = BoundParams(S=1)
    A = np.array([[1.0, 0.0, 1.0, 1.0], [0.0, 1.0, 1.0, 0.0]])
    B = rng.uniform(0.05, pair.b_max, (2, 4))
    Q = np.column_stack([rng.uniform(0, 500, (4, 2)), np.full(4, 100.0)])
    ours = g_values(A, B, Q, pair, p)
    ref = g_by_hand(A.tolist(), B.tolist(), Q.tolist(), pair, 1)
    assert np.allclose(ours, ref, rtol=1e-12)
    assert g_value(A[:, 2:4], B[:, 2:4], Q[2:4], pair, p) == pytest.approx(ref[3], rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), S=st.integers(1, 6), K=st.integers(1, 12))
def test_g_random_instances_match_hand_transcription(seed, S, K):
    rng = np.random.default_rng(seed)
    sc = generate_scenario(seed % 1000, "uniform", 4, ScenarioParams(K=K))
    A = (rng.uniform(size=(4, K)) < 0.5).astype(float)
    B = rng.uniform(0.0, sc.b_max, (4, K))
    Q = np.column_stack([rng.uniform(0, 1000, (K, 2)), np.full(K, 100.0)])
    ref = g_by_hand(A.tolist(), B.tolist(), Q.tolist(), sc, S)
    assert np.allclose(g_values(A, B, Q, sc, BoundParams(S=S)), ref, rtol=1e-10)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_g_invariant_under_device_permutation(seed):
    rng = np.random.default_rng(seed)
    xy = rng.uniform(0, 1000, (5, 2))
    perm = rng.permutation(5)
    K = 6
    A = (rng.uniform(size=(5, K)) < 0.5).astype(float)
    B = rng.uniform(0.0, 0.2, (5, K))
    Q = np.column_stack([rng.uniform(0, 1000, (K, 2)), np.full(K, 100.0)])
    p = BoundParams(S=2)
    a = g_values(A, B, Q, Scenario.from_positions(xy), p)
    b = g_values(A[perm], B[perm], Q, Scenario.from_positions(xy[perm]), p)
    assert np.allclose(a, b, rtol=1e-12)


def test_g_singular_when_uav_on_device():
    sc = Scenario.from_positions(np.array([[10.0, 10.0]]))
    with pytest.raises(SingularityError):
        g_values(np.ones((1, 1)), np.ones((1, 1)), np.array([[10.0, 10.0, 0.0]]), sc, BoundParams(S=1))


def test_g_at_least_the_selection_term():
    rng = np.random.default_rng(2)
    sc = generate_scenario(2, "uniform", 3)
    A = (rng.uniform(size=(3, 10)) < 0.4).astype(float)
    B = rng.uniform(0, sc.b_max, (3, 10))
    Q = np.column_stack([rng.uniform(0, 1000, (10, 2)), np.full(10, 100.0)])
    g = g_values(A, B, Q, sc, BoundParams(S=3))
    assert np.all(g >= 18 * 9 + 24 * ((3 - A.sum(0)) / 3) ** 2 - 1e-9)


def test_selection_error_bound_vanishes_at_full_participation():
    assert e_d_bound(6, 6, 123.0) == 0.0
    assert e_d_bound(3, 6, 10.0) == pytest.approx(8 * 10 * 0.25)


def test_staleness_error_bound_term_elimination():
    p = BoundParams(delta=0.0, alpha1=3.0, alpha2=0.5, S=4)
    theta = p.delta**2 + p.alpha1 + p.alpha2 * 7.0
    assert e_a_bound(theta, 4, 0.0, 0.0) == pytest.approx(6 * 16 * (3.0 + 0.5 * 7.0))


def test_past_window_sums_exclude_current_slot():
    v = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
    assert past_window_sums(v, 2).tolist() == [0.0, 1.0, 3.0, 5.0, 7.0]


def test_pure_contraction_without_cost():
    p = BoundParams(delta=0.0)
    b = bound_from_g(np.zeros(30), p, 2.5)
    assert b.total == pytest.approx((1 - p.mu / p.L) ** 30 * 2.5, rel=1e-12)
    assert b.asymptotic == 0.0


def test_geometric_series_with_spread():
    p = BoundParams(delta=2.0)
    K = 40
    rho = 1 - p.mu / p.L
    b = bound_from_g(np.zeros(K), p, 1.0)
    series = sum(3 * p.delta**2 / p.L * rho ** (K - k) for k in range(1, K + 1))
    assert b.total == pytest.approx(rho**K + series, rel=1e-12)


def test_uniform_slots_closed_form():
    p = BoundParams(alpha2=1e-4, S=2)
    g = np.full(25, 80.0)
    rho = float(contraction(80.0, p))
    add = float(additive(80.0, p))
    assert bound_from_g(g, p, 0.0).asymptotic == pytest.approx(add * (1 - rho**25) / (1 - rho), rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), K=st.integers(1, 40))
def test_log_space_matches_direct_recursion(seed, K):
    rng = np.random.default_rng(seed)
    p = BoundParams(alpha2=rng.uniform(0, 0.02), S=3)
    g = rng.uniform(0, 100, K)
    gap0 = rng.uniform(0, 50)
    b = bound_from_g(g, p, gap0)
    assert b.total == pytest.approx(recursion_by_hand(g, p, gap0), rel=1e-9)
    assert b.asymptotic == pytest.approx(recursion_by_hand(g, p, 0.0), rel=1e-9)
    assert b.initial + b.asymptotic == b.total


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), slot=st.integers(0, 19), bump=st.floats(1e-6, 100.0))
def test_raising_any_g_never_lowers_objective(seed, slot, bump):
    rng = np.random.default_rng(seed)
    p = BoundParams(alpha2=0.01, S=3)
    g = rng.uniform(0, 200, 20)
    base = bound_from_g(g, p, 0.0).log_asymptotic
    g[slot] += bump
    assert bound_from_g(g, p, 0.0).log_asymptotic >= base


def test_large_horizon_stays_finite_in_log_space():
    p = BoundParams(S=50)
    g = np.full(10000, 18 * 50**2 + 10.0)
    b = bound_from_g(g, p, 1.0)
    assert np.isfinite(b.log_asymptotic)
    assert b.nonconvergent_slots[:2] == (1, 2)


def _schedule(sc, K, rng):
    A = (rng.uniform(size=(sc.M, K)) < 0.5).astype(float)
    B = rng.uniform(0.01, sc.b_max, (sc.M, K))
    Q = np.column_stack([rng.uniform(0, 1000, (K + 1, 2)), np.full(K + 1, sc.H)])
    return Schedule(A=A, B=B, Q=Q)


def test_schedule_level_bound_and_objective_agree():
    rng = np.random.default_rng(8)
    sc = generate_scenario(8, "uniform", 4)
    s = _schedule(sc, 12, rng)
    p = BoundParams(alpha2=1e-4, S=3)
    fb = finite_horizon_bound(s, sc, p, 7.0)
    assert fb.asymptotic == asymptotic_objective(s, sc, p)
    assert fb.total - fb.initial == pytest.approx(asymptotic_objective(s, sc, p), rel=1e-12)
    assert log_asymptotic_objective(s, sc, p) == pytest.approx(np.log(fb.asymptotic), rel=1e-12)
    # periodic expansion repeats the per-slot costs of the cycle except at the start
    g2 = schedule_g_values(s, sc, p, 24)
    assert np.allclose(g2[12 + 3:], schedule_g_values(s, sc, p)[3:], rtol=1e-12)


def test_closer_uav_lowers_objective():
    # all else fixed, moving the UAV toward the selected devices improves every slot
    sc = Scenario.from_positions(np.array([[300.0, 300.0], [320.0, 310.0]]))
    K = 8
    A = np.ones((2, K))
    B = np.full((2, K), sc.b_max)
    p = BoundParams(alpha2=1e-4, S=2)
    far = np.tile([600.0, 600.0, 100.0], (K + 1, 1))
    near = np.tile([400.0, 400.0, 100.0], (K + 1, 1))
    lf = log_asymptotic_objective(Schedule(A, B, far), sc, p)
    ln = log_asymptotic_objective(Schedule(A, B, near), sc, p)
    assert ln < lf
