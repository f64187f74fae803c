import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_feasible_trajectory
from uavafl.errors import ConfigurationError, ShapeError, SingularityError
from uavafl.scenario import (
    Clusters,
    Scenario,
    ScenarioParams,
    Trajectory,
    channel,
    channel_magnitudes,
    channel_phases,
    dbm_to_watts,
    generate_scenario,
    parse_layout,
    sigma_w,
    validate_trajectory,
)
from uavafl.seeding import derive_seed, substream


def test_uniform_layout_is_reproducible_and_inside_area():
    a = generate_scenario(7, "uniform", 20, ScenarioParams(area_side=1000.0))
    b = generate_scenario(7, "uniform", 20, ScenarioParams(area_side=1000.0))
    assert a.positions.shape == (20, 3)
    assert np.array_equal(a.positions, b.positions)
    assert np.all((a.positions[:, :2] >= 0) & (a.positions[:, :2] <= 1000))
    assert np.all(a.positions[:, 2] == 0)


def test_other_seed_moves_devices():
    a = generate_scenario(7, "uniform", 5)
    b = generate_scenario(8, "uniform", 5)
    assert not np.array_equal(a.positions, b.positions)


def test_clusters_deal_devices_evenly_within_radius():
    sc = generate_scenario(1, Clusters(5, 50.0), 20)
    ids = np.array([d.cluster_id for d in sc.devices])
    assert np.bincount(ids).tolist() == [4] * 5
    for c in range(5):
        pts = sc.positions[ids == c, :2]
        # the centre is unknown here; every pair of members is within one diameter
        gaps = np.linalg.norm(pts[:, None] - pts[None], axis=2)
        assert gaps.max() <= 100.0 + 1e-9


def test_cluster_members_within_radius_of_centre():
    # recompute the centres from the same substream to check the radius directly
    sc = generate_scenario(11, Clusters(3, 30.0), 9)
    rng = substream(11, "scenario")
    centres = rng.uniform(30.0, 970.0, size=(3, 2))
    for d in sc.devices:
        assert np.linalg.norm(d.position[:2] - centres[d.cluster_id]) <= 30.0 + 1e-9


@pytest.mark.parametrize("M", [0, -3])
def test_no_devices_is_a_configuration_error(M):
    with pytest.raises(ConfigurationError):
        generate_scenario(0, "uniform", M)


def test_oversized_cluster_radius_rejected():
    with pytest.raises(ConfigurationError):
        generate_scenario(0, Clusters(2, 600.0), 4)


def test_layout_parsing():
    assert parse_layout("uniform") == "uniform"
    assert parse_layout("clusters", 3, 25) == Clusters(3, 25.0)
    with pytest.raises(ConfigurationError):
        parse_layout("clusters")
    with pytest.raises(ConfigurationError):
        parse_layout("ring")


def test_config_boundary_converts_decibels():
    p = ScenarioParams.from_mapping({"g0_dB": "-60", "noise_dBm": "-80", "K_cycle": "30",
                                     "compute_time_slots": "2,5", "qF_xy": "10, 20"})
    assert p.g0 == pytest.approx(1e-6, rel=1e-12)
    assert p.noise_power == pytest.approx(1e-11, rel=1e-12)
    assert dbm_to_watts(30.0) == pytest.approx(1.0)
    assert p.K == 30 and p.compute_time == (2, 5) and p.qF_xy == (10.0, 20.0)


def test_per_cluster_compute_times():
    sc = generate_scenario(0, Clusters(2, 10.0), 5, ScenarioParams(compute_time=(1, 4)))
    ids = [d.cluster_id for d in sc.devices]
    assert sc.compute_times.tolist() == [(1, 4)[i] for i in ids]


def test_sigma_w_closed_forms():
    same = Scenario.from_positions(np.tile([3.0, 4.0], (5, 1)))
    assert sigma_w(same) == 0.0
    two = Scenario.from_positions(np.array([[0.0, 0.0], [2.0, 0.0]]))
    assert sigma_w(two) == pytest.approx(2.0)


@pytest.fixture
def params():
    return ScenarioParams(K=10)


def test_hover_at_dispatch_is_feasible(params):
    sc = Scenario.from_positions(np.array([[100.0, 100.0]]), params)
    assert validate_trajectory(sc, Trajectory.hover(sc)) == []


def test_sixty_metre_step_breaks_speed_limit(params):
    sc = Scenario.from_positions(np.array([[100.0, 100.0]]), params)
    q = np.tile(sc.q_F, (11, 1))
    q[5:, 0] += 60.0
    q[-1] = sc.q_F
    kinds = {(v.kind, v.slot) for v in validate_trajectory(sc, q)}
    assert ("velocity", 4) in kinds


def test_wrong_endpoint_reported(params):
    sc = Scenario.from_positions(np.array([[100.0, 100.0]]), params)
    q = np.tile(sc.q_F, (11, 1))
    q[-1, 0] += 1.0
    assert [v.kind for v in validate_trajectory(sc, q) if v.kind == "endpoint"] == ["endpoint"]


def test_trajectory_length_mismatch(params):
    sc = Scenario.from_positions(np.array([[100.0, 100.0]]), params)
    with pytest.raises(ShapeError):
        validate_trajectory(sc, np.tile(sc.q_F, (5, 1)))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), K=st.integers(5, 80))
def test_random_feasible_trajectories_pass(seed, K):
    sc = Scenario.from_positions(np.array([[500.0, 500.0]]), ScenarioParams(K=K))
    q = random_feasible_trajectory(np.random.default_rng(seed), sc, K)
    assert validate_trajectory(sc, q) == []


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), K=st.integers(6, 60), slot=st.integers(1, 1000),
       excess=st.floats(0.01, 50.0))
def test_single_slot_overshoot_is_caught(seed, K, slot, excess):
    sc = Scenario.from_positions(np.array([[500.0, 500.0]]), ScenarioParams(K=K))
    q = random_feasible_trajectory(np.random.default_rng(seed), sc, K)
    k = 1 + slot % (K - 1)
    # jump far enough that the step into slot k is faster than allowed
    step = q[k, :2] - q[k - 1, :2]
    direction = step / np.linalg.norm(step) if np.linalg.norm(step) > 0 else np.array([1.0, 0.0])
    q[k, :2] = q[k - 1, :2] + direction * (sc.v_max * sc.delta_t + excess)
    assert any(v.kind == "velocity" for v in validate_trajectory(sc, q))


def test_acceleration_violation():
    sc = Scenario.from_positions(np.array([[500.0, 500.0]]), ScenarioParams(K=6))
    q = np.tile(sc.q_F, (7, 1))
    q[1:3, 0] = [0.0, 20.0]  # 20 m/s after standing still: 20 m/s^2 > 15
    q[3:6, 0] = [20.0, 20.0, 20.0]
    q[5, 0] = 10.0
    kinds = [v.kind for v in validate_trajectory(sc, q)]
    assert "acceleration" in kinds


def test_channel_reference_values():
    sc = Scenario.from_positions(np.array([[0.0, 0.0]]), ScenarioParams(qF_xy=(0.0, 0.0)))
    assert sc.g0 == pytest.approx(1e-6)
    above = channel(sc, np.array([0.0, 0.0, 100.0]), 0)
    assert above.magnitude == pytest.approx(1e-5, rel=1e-12)
    one_metre = channel(sc, np.array([0.0, 0.0, 1.0]), 0)
    assert one_metre.magnitude == pytest.approx(np.sqrt(sc.g0), rel=1e-12)
    assert 0.0 <= above.phase < 2 * np.pi


def test_channel_at_device_is_singular():
    sc = Scenario.from_positions(np.array([[10.0, 10.0]]))
    with pytest.raises(SingularityError):
        channel(sc, np.array([10.0, 10.0, 0.0]), 0)
    with pytest.raises(SingularityError):
        channel_magnitudes(sc, np.array([[10.0, 10.0, 0.0]]))


@settings(max_examples=50, deadline=None)
@given(d=st.floats(1.0, 1e4), x=st.floats(-1e3, 1e3))
def test_doubling_distance_halves_magnitude(d, x):
    sc = Scenario.from_positions(np.array([[x, 0.0]]))
    near = channel(sc, np.array([x, 0.0, d]), 0).magnitude
    far = channel(sc, np.array([x, 0.0, 2 * d]), 0).magnitude
    assert far == pytest.approx(near / 2, rel=1e-12)
    assert channel(sc, np.array([x, 0.0, 1.01 * d]), 0).magnitude < near


def test_phases_uniform_and_seeded():
    a = channel_phases(5, 4, 1000)
    assert np.array_equal(a, channel_phases(5, 4, 1000))
    assert a.min() >= 0 and a.max() < 2 * np.pi
    assert abs(a.mean() - np.pi) < 0.1


def test_substreams_are_named_and_stable():
    a = substream(1, "noise").standard_normal(3)
    assert np.array_equal(a, substream(1, "noise").standard_normal(3))
    assert not np.array_equal(a, substream(1, "phase").standard_normal(3))
    assert derive_seed(1, "trials", 0) != derive_seed(1, "trials", 1)
    assert derive_seed(1, "trials", 0) == derive_seed(1, "trials", 0)


def test_all_devices_in_line_of_sight(desk_scenario):
    assert desk_scenario.los_set(17).tolist() == list(range(6))
