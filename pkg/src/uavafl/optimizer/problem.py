"""Problem instance: constants, constraint windows and a feasible start."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from uavafl.constraints import check_selection, window_matrix
from uavafl.errors import InfeasibleProblemError
from uavafl.params import BoundParams
from uavafl.scenario import Scenario, channel_magnitudes


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    scenario: Scenario
    params: BoundParams
    K: int
    compute_times: np.ndarray
    cyclic: bool = False
    stale_windows: np.ndarray = field(repr=False, default=None)
    busy_windows: dict = field(repr=False, default=None)  # c -> (device rows, window matrix)

    @property
    def M(self) -> int:
        return self.scenario.M

    @property
    def noise_power(self) -> float:
        return self.scenario.noise_power

    @property
    def P0(self) -> float:
        return self.scenario.P0

    def check(self, A: np.ndarray, first_only: bool = False, binary: bool = True):
        return check_selection(A, self.params.S, self.compute_times, self.cyclic, first_only, binary)


def _device_feasible(c: int, S: int, K: int, cyclic: bool) -> bool:
    if c + 1 > S:
        return False
    if not cyclic:
        return True
    # need n selections with every cyclic gap in [c + 1, S]
    n = -(-K // S)
    return n * (c + 1) <= K


def build_problem(scenario: Scenario, params: BoundParams, K: int | None = None,
                  cyclic: bool = False) -> ProblemSpec:
    """Materialize staleness and busy windows and probe feasibility.

    ``cyclic=True`` wraps the windows around the horizon so that periodic
    repetition of the schedule keeps every constraint.
    """
    K = scenario.K if K is None else int(K)
    S = params.S
    c = scenario.compute_times
    if K < S:
        raise InfeasibleProblemError(f"horizon K={K} shorter than the staleness bound S={S}")
    if K <= int(c.max()):
        raise InfeasibleProblemError(f"horizon K={K} not longer than the largest compute time {int(c.max())}")
    bad = [m for m in range(scenario.M) if not _device_feasible(int(c[m]), S, K, cyclic)]
    if bad:
        m = bad[0]
        raise InfeasibleProblemError(
            f"device {m} with compute time {int(c[m])} cannot be polled every {S} slots over K={K}"
            + (" (cyclic)" if cyclic else ""))
    busy = {}
    for cm in np.unique(c):
        if cm > 0:
            busy[int(cm)] = (np.flatnonzero(c == cm), window_matrix(K, cm + 1, cyclic))
    spec = ProblemSpec(scenario, params, K, c, cyclic, window_matrix(K, S, cyclic), busy)
    probe = initial_selection(spec, np.tile(scenario.q_F, (K + 1, 1)))
    viol = spec.check(probe, first_only=True)
    if viol:
        raise InfeasibleProblemError(f"greedy feasibility probe failed: {viol[0]}")
    return spec


def polling_slots(K: int, S: int, offset: int) -> np.ndarray:
    """ceil(K/S) slots (0-based) spread evenly around a cycle of length K."""
    n = -(-K // S)
    return (offset + (np.arange(n) * K) // n) % K


def _slots_ok(slots: np.ndarray, K: int, S: int, c: int, cyclic: bool) -> bool:
    """Staleness and busy windows for one device selected at sorted 0-based ``slots``."""
    if slots.size == 0:
        return False
    gaps = np.diff(slots)
    if cyclic:
        gaps = np.append(gaps, slots[0] + K - slots[-1])
    elif slots[0] > S - 1 or slots[-1] < K - S:
        return False
    return bool(np.all(gaps <= S) and np.all(gaps >= c + 1))


def _candidate_slots(spec: ProblemSpec, m: int) -> list[np.ndarray]:
    K, S = spec.K, spec.params.S
    cands = [np.sort(polling_slots(K, S, o)) for o in range(K)]
    if not spec.cyclic:
        cands += [np.arange(o, K, S) for o in range(S)]
    seen, out = set(), []
    for slots in cands:
        key = tuple(slots.tolist())
        if key in seen or not _slots_ok(slots, K, S, int(spec.compute_times[m]), spec.cyclic):
            continue
        seen.add(key)
        out.append(slots)
    return out


def initial_selection(spec: ProblemSpec, Q: np.ndarray, objective=None, sweeps: int = 2) -> np.ndarray:
    """Regular polling of every device, phase chosen for the strongest channels along ``Q``.

    Candidates are ceil(K/S) evenly spread slots (valid cyclically) and, for
    non-cyclic problems, every S-th slot from some offset. When ``objective``
    (a callable on A, lower is better) is given, the phases are then refined
    one device at a time.
    """
    K, S = spec.K, spec.params.S
    h2 = channel_magnitudes(spec.scenario, Q[1:]) ** 2
    A = np.zeros((spec.M, K))
    cands = [_candidate_slots(spec, m) for m in range(spec.M)]
    for m in range(spec.M):
        if cands[m]:
            best = max(cands[m], key=lambda slots: h2[m, slots].mean())
        else:
            best = polling_slots(K, S, 0)
        A[m, best] = 1.0
    if objective is None:
        return A
    current = objective(A)
    for _ in range(sweeps):
        improved = False
        for m in range(spec.M):
            for slots in cands[m]:
                trial = A.copy()
                trial[m] = 0.0
                trial[m, slots] = 1.0
                val = objective(trial)
                if val < current - 1e-12 * abs(current):
                    A, current, improved = trial, val, True
        if not improved:
            break
    return A
