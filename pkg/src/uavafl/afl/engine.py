"""Slot-level asynchronous training loop with staleness tracking."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from uavafl.afl.history import TrainingHistory
from uavafl.afl.tasks import LearningTask
from uavafl.aircomp import _check_even, aggregate_chain, transmit_and_aggregate
from uavafl.constraints import check_selection
from uavafl.errors import InfeasibleScheduleError, SchedulingViolation, ShapeError
from uavafl.params import BoundParams
from uavafl.scenario import Scenario, channel_magnitudes, channel_phases, validate_trajectory
from uavafl.schedule import Schedule
from uavafl.seeding import substream


@dataclass
class ModelState:
    x: np.ndarray
    k: int = 1


@dataclass
class DeviceRuntime:
    """Per-device bookkeeping; slot 0 stands for the initial model broadcast."""

    last_selected_slot: int | None = 0
    busy_until: int = 0
    cached_gradient: np.ndarray | None = None
    basis_slot: int = 1

    def staleness(self, k: int) -> int | None:
        return None if self.last_selected_slot is None else k - self.last_selected_slot

    def ready(self, k: int) -> bool:
        return self.busy_until < k and self.cached_gradient is not None


@dataclass(frozen=True)
class ErrorBreakdown:
    e_a: np.ndarray
    e_d: np.ndarray
    e_c: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.e_a + self.e_d + self.e_c

    @classmethod
    def zeros(cls, D: int) -> "ErrorBreakdown":
        z = np.zeros(D)
        return cls(z, z.copy(), z.copy())


@dataclass(frozen=True)
class SlotMetrics:
    k: int
    n_selected: int
    max_staleness: int
    nmse_db: float
    zeta: float
    comm_mse_expected: float  # noise-averaged ||e_c||^2 given this slot's gradients
    grad_norm_sq: float  # ||grad F(x(k))||^2
    update: np.ndarray = field(repr=False, default=None)


class TrainingEngine:
    """Holds the model and device runtimes and executes one slot at a time."""

    def __init__(self, task: LearningTask, scenario: Scenario, lr: float,
                 noise_power: float | None = None, P0: float | None = None):
        if task.M != scenario.M:
            raise ShapeError(f"task has {task.M} devices, scenario has {scenario.M}")
        _check_even(task.D)
        self.task = task
        self.scenario = scenario
        self.lr = float(lr)
        self.noise_power = scenario.noise_power if noise_power is None else noise_power
        self.P0 = scenario.P0 if P0 is None else P0
        self.c = scenario.compute_times
        self.state = ModelState(np.array(task.x0, dtype=float), 1)
        grads = task.local_gradients(self.state.x)
        self.runtimes = [DeviceRuntime(cached_gradient=grads[m].copy()) for m in range(task.M)]

    def ready_set(self, k: int) -> np.ndarray:
        return np.array([m for m, r in enumerate(self.runtimes) if r.ready(k)], dtype=int)

    def staleness(self, k: int) -> np.ndarray:
        return np.array([r.staleness(k) for r in self.runtimes])

    def step(self, selected, magnitudes, phases, amplitudes, rng: np.random.Generator,
             error_free: bool = False, los=None) -> tuple[ModelState, ErrorBreakdown, SlotMetrics]:
        """Execute slot ``state.k``; channel arrays are indexed by device (length M)."""
        k = self.state.k
        x = self.state.x
        sel = np.asarray(selected, dtype=int)
        los_set = set(range(self.task.M)) if los is None else set(np.asarray(los).tolist())
        for m in sel:
            r = self.runtimes[m]
            if not r.ready(k):
                raise SchedulingViolation(f"device {m} selected at slot {k} while busy until {r.busy_until}")
            if m not in los_set:
                raise SchedulingViolation(f"device {m} selected at slot {k} without line of sight")
        tau = self.staleness(k)
        full = self.task.gradient(x)
        gn2 = float(full @ full)
        if sel.size == 0:
            metrics = SlotMetrics(k, 0, int(tau.max()), float("nan"), 0.0, 0.0, gn2,
                                  np.zeros_like(x))
            self.state = ModelState(x, k + 1)
            return self.state, ErrorBreakdown.zeros(x.size), metrics

        cached = np.stack([r.cached_gradient for r in self.runtimes])
        G = cached[sel]
        g = G.mean(axis=0)
        if error_free:
            g_hat, zeta, expected = g.copy(), 0.0, 0.0
        else:
            res = transmit_and_aggregate(G, np.asarray(magnitudes)[sel], np.asarray(phases)[sel],
                                         None, self.noise_power, rng, P0=self.P0,
                                         amplitudes=np.asarray(amplitudes)[sel])
            g_hat, zeta = res.estimate, res.zeta
            expected = _expected_comm_error(G, np.asarray(magnitudes)[sel],
                                            np.asarray(amplitudes)[sel], zeta, self.noise_power)
        stale_mean = cached.mean(axis=0)
        errors = ErrorBreakdown(e_a=full - stale_mean, e_d=stale_mean - g, e_c=g - g_hat)
        update = -self.lr * g_hat
        x_new = x + update
        new_grads = self.task.local_gradients(x_new)
        for m in sel:
            r = self.runtimes[m]
            r.last_selected_slot = k
            r.busy_until = k + int(self.c[m])
            r.cached_gradient = new_grads[m].copy()
            r.basis_slot = k + 1
        den = float(g @ g)
        num = float((g_hat - g) @ (g_hat - g))
        if den == 0.0:
            nmse = float("nan")
        elif num == 0.0:
            nmse = float("-inf")
        else:
            nmse = float(10.0 * np.log10(num / den))
        metrics = SlotMetrics(k, int(sel.size), int(tau.max()), nmse, float(zeta), expected, gn2, update)
        self.state = ModelState(x_new, k + 1)
        return self.state, errors, metrics


def _expected_comm_error(G, h, b, zeta, noise_power) -> float:
    """E_noise ||g - g_hat||^2 for fixed gradients: bias energy plus C zeta^2 sigma^2."""
    C = G.shape[1] // 2
    est, g, _ = aggregate_chain(G, h, np.zeros_like(h), b, np.zeros(C), zeta=np.float64(zeta))
    bias = g - est
    return float(bias @ bias + C * zeta**2 * noise_power)


def run_training(scenario: Scenario, schedule: Schedule, task: LearningTask,
                 params: BoundParams, seed: int, n_slots: int | None = None,
                 check: bool = True, record_errors: bool = False) -> TrainingHistory:
    """Repeat ``schedule`` periodically for ``n_slots`` slots and train.

    Per-slot phases and receiver noise come from the ``phase`` and ``noise``
    substreams of ``seed``.
    """
    n_slots = schedule.K if n_slots is None else int(n_slots)
    if schedule.M != scenario.M:
        raise ShapeError(f"schedule has {schedule.M} devices, scenario has {scenario.M}")
    run = schedule.expanded(n_slots)
    if check:
        S = None if "staleness" in schedule.relaxed else params.S
        bad = check_selection(run.A, S, scenario.compute_times, cyclic=False, first_only=True)
        if bad:
            raise InfeasibleScheduleError(str(bad[0]), bad[0])
        if "mechanics" not in schedule.relaxed:
            viol = validate_trajectory(scenario, schedule.Q, K=schedule.K)
            if viol:
                raise InfeasibleScheduleError(f"trajectory violates {viol[0].kind} at slot {viol[0].slot}", viol[0])
        if np.any(2.0 * schedule.B**2 > scenario.P0 * (1 + 1e-9)):
            raise InfeasibleScheduleError("amplitudes exceed the power budget")
    engine = TrainingEngine(task, scenario, params.learning_rate)
    mags = channel_magnitudes(scenario, schedule.Q[1:])
    phases = channel_phases(seed, scenario.M, n_slots)
    rng = substream(seed, "noise")
    hist = TrainingHistory.start(task, engine.state.x, n_slots, record_errors)
    for k in range(1, n_slots + 1):
        j = schedule.cycle_slot(k) - 1
        _, err, met = engine.step(run.selected(k), mags[:, j], phases[:, k - 1], schedule.B[:, j],
                                  rng, error_free=schedule.error_free, los=scenario.los_set(k))
        hist.record(k, task, engine.state.x, met, err)
    return hist
