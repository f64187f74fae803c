import numpy as np
import pytest

from uavafl.scenario import Clusters, ScenarioParams, generate_scenario


@pytest.fixture
def desk_scenario():
    """Six devices in two tight clusters, cycle of 60 slots."""
    return generate_scenario(3, Clusters(2, 40.0), 6, ScenarioParams(K=60))


def random_feasible_trajectory(rng: np.random.Generator, scenario, K: int) -> np.ndarray:
    """Random out-and-back flight that respects the speed and acceleration limits.

    The outbound leg integrates random accelerations followed by their
    reversal (so it ends at rest), the return retraces it, and the whole
    displacement is then scaled down until both limits hold.
    """
    n = max(1, (K - 1) // 4)
    raw = rng.uniform(-1.0, 1.0, size=(n, 2))
    acc = np.vstack([raw, -raw[::-1]])
    v = np.vstack([[0.0, 0.0], np.cumsum(acc, axis=0)])
    out = np.vstack([[0.0, 0.0], np.cumsum(v, axis=0)])[: 2 * n + 1]
    path = np.vstack([out, np.repeat(out[-1:], K + 1 - 2 * (2 * n + 1), axis=0), out[::-1]])
    dt = scenario.delta_t
    speed = np.linalg.norm(np.diff(path, axis=0), axis=1).max() / dt
    accel = np.linalg.norm(np.diff(path, 2, axis=0), axis=1).max() / dt**2
    scale = 0.99 / max(speed / scenario.v_max, accel / scenario.a_max, 1e-12)
    xy = scenario.q_F[:2] + scale * path
    return np.column_stack([xy, np.full(K + 1, scenario.H)])


# -- acceptance reporting ------------------------------------------------------

def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion reported as one PASS/FAIL line")
    config._criteria = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call":
        return
    detail = dict(item.user_properties).get("detail", "")
    item.config._criteria.append((mark.args[0], rep.passed, detail))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not config._criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in config._criteria:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  ({detail})" if detail else ""))
