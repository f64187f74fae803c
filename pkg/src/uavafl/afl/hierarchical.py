"""Epoch-based training where partial over-the-air aggregates are buffered
until every device has contributed once, then applied as one global update."""

from __future__ import annotations

import numpy as np

from uavafl.afl.engine import SlotMetrics
from uavafl.afl.history import TrainingHistory
from uavafl.afl.tasks import LearningTask
from uavafl.aircomp import nmse_db, transmit_and_aggregate
from uavafl.params import BoundParams
from uavafl.scenario import Scenario, channel_magnitudes, channel_phases, distances
from uavafl.seeding import substream


def run_hierarchical_training(scenario: Scenario, Q: np.ndarray, task: LearningTask,
                              params: BoundParams, seed: int, n_slots: int,
                              d_thr: float = 250.0, amplitudes: float | None = None,
                              ) -> TrainingHistory:
    """``Q`` is one tour (K + 1 positions), repeated periodically.

    In each slot, pending devices within ``d_thr`` of the UAV that have
    finished computing are aggregated together. Staleness counts slots since
    a device last received the global model.
    """
    Q = np.asarray(Q, float)
    K = Q.shape[0] - 1
    M = scenario.M
    b = scenario.b_max if amplitudes is None else float(amplitudes)
    near = distances(scenario, Q[1:]) <= d_thr  # (M, K)
    mags = channel_magnitudes(scenario, Q[1:])
    phases = channel_phases(seed, M, n_slots)
    rng = substream(seed, "noise")
    c = scenario.compute_times
    lr = params.learning_rate

    x = np.array(task.x0, float)
    grads = task.local_gradients(x)
    pending = np.ones(M, bool)
    received = np.zeros(M, int)
    busy_until = np.zeros(M, int)
    buffered = np.zeros(task.D)
    hist = TrainingHistory.start(task, x, n_slots)
    updates = 0
    for k in range(1, n_slots + 1):
        j = (k - 1) % K
        tau = k - received
        full = task.gradient(x)
        group = np.flatnonzero(pending & near[:, j] & (busy_until < k))
        nm = float("nan")
        zeta = 0.0
        if group.size:
            res = transmit_and_aggregate(grads[group], mags[group, j], phases[group, k - 1], None,
                                         scenario.noise_power, rng, amplitudes=np.full(group.size, b))
            if np.any(res.true_mean != 0):
                nm = nmse_db(res.estimate, res.true_mean)
            zeta = res.zeta
            buffered += group.size * res.estimate
            pending[group] = False
        if not pending.any():
            x = x - lr * buffered / M
            grads = task.local_gradients(x)
            received[:] = k
            busy_until = k + c
            pending[:] = True
            buffered = np.zeros(task.D)
            updates += 1
        met = SlotMetrics(k, int(group.size), int(tau.max()), nm, zeta, 0.0, float(full @ full))
        hist.record(k, task, x, met)
    hist.meta["global_updates"] = updates
    return hist
