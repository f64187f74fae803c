"""Convergence analytics: per-slot cost g, error bounds and the horizon bound.

Products of per-slot contraction factors are accumulated in log space; the
factors are always positive (g >= 0 gives contraction >= 1 - mu/L > 0).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from uavafl.params import BoundParams
from uavafl.scenario import Scenario, channel_magnitudes
from uavafl.schedule import Schedule


@dataclass(frozen=True)
class SlotCost:
    g_value: float
    contraction: float
    additive: float

    @property
    def convergent(self) -> bool:
        return self.contraction <= 1.0


@dataclass(frozen=True)
class BoundBreakdown:
    initial: float
    asymptotic: float
    log_initial: float
    log_asymptotic: float
    nonconvergent_slots: tuple[int, ...]

    @property
    def total(self) -> float:
        return self.initial + self.asymptotic

    @property
    def log_total(self) -> float:
        return float(np.logaddexp(self.log_initial, self.log_asymptotic))


def received_terms(A, B, Q, scenario: Scenario) -> tuple[np.ndarray, np.ndarray]:
    """Per-slot (sum_m a_m, eps) where eps = (sum a|h|b)^2 / (sum a|h|^2 b^2 + sigma^2/2).

    ``A``/``B`` are (M, K) and ``Q`` holds the K slot positions (K, 3).
    Fractional ``a`` is used as a weight, as in the relaxed problem.
    """
    A = np.asarray(A, float)
    B = np.asarray(B, float)
    h = channel_magnitudes(scenario, np.asarray(Q, float))
    hb = h * B
    num = np.sum(A * hb, axis=0) ** 2
    den = np.sum(A * hb**2, axis=0) + scenario.noise_power / 2.0
    return A.sum(axis=0), num / den


def _window_sums(t: np.ndarray, S: int) -> np.ndarray:
    """sum_{j=max(1,k-S)}^{k} t(j) for k = 1..K."""
    c = np.concatenate([[0.0], np.cumsum(t)])
    k = np.arange(1, len(t) + 1)
    return c[k] - c[np.maximum(k - S - 1, 0)]


def g_values(A, B, Q, scenario: Scenario, params: BoundParams, S: int | None = None) -> np.ndarray:
    """g for every slot of a (K-slot) schedule; ``Q`` is (K, 3) slot positions.

    ``S`` overrides ``params.S`` (S = 0 is allowed here, unlike in the params).
    """
    M = scenario.M
    n, eps = received_terms(A, B, Q, scenario)
    S = params.S if S is None else int(S)
    if S < 0:
        raise ValueError("S must be >= 0")
    return 18.0 * S**2 + 24.0 * ((M - n) / M) ** 2 + 18.0 * S * _window_sums(n - eps, S)


def g_value(A_window, B_window, Q_window, scenario: Scenario, params: BoundParams,
            S: int | None = None) -> float:
    """g at the last slot of a window of up to S + 1 slot columns."""
    A_window = np.asarray(A_window, float)
    S = params.S if S is None else int(S)
    if A_window.shape[1] > S + 1:
        raise ValueError("window longer than S + 1 slots")
    return float(g_values(A_window, B_window, Q_window, scenario, params, S)[-1])


def contraction(g, params: BoundParams):
    return 1.0 - params.mu / params.L * (1.0 - np.asarray(g) * params.alpha2)


def additive(g, params: BoundParams):
    d2 = params.delta**2
    return (np.asarray(g) * (d2 + params.alpha1) + 6.0 * d2) / (2.0 * params.L)


def slot_costs(schedule: Schedule, scenario: Scenario, params: BoundParams,
               n_slots: int | None = None) -> list[SlotCost]:
    g = schedule_g_values(schedule, scenario, params, n_slots)
    return [SlotCost(float(v), float(r), float(a))
            for v, r, a in zip(g, contraction(g, params), additive(g, params))]


def schedule_g_values(schedule: Schedule, scenario: Scenario, params: BoundParams,
                      n_slots: int | None = None) -> np.ndarray:
    s = schedule if n_slots is None else schedule.expanded(n_slots)
    return g_values(s.A, s.B, s.Q[1:], scenario, params)


def theta(params: BoundParams, grad_norm_sq) -> np.ndarray:
    """delta^2 + alpha1 + alpha2 ||grad F(x(k))||^2."""
    return params.delta**2 + params.alpha1 + params.alpha2 * np.asarray(grad_norm_sq)


def e_d_bound(n_selected, M: int, theta_k) -> np.ndarray:
    return 8.0 * np.asarray(theta_k) * ((M - np.asarray(n_selected)) / M) ** 2


def e_a_bound(theta_k, S: int, comm_mse_window_sum, delta: float) -> np.ndarray:
    """6 S^2 theta + 6 S sum_{j=k-S}^{k-1} E||e_c(j)||^2 + 2 delta^2."""
    return 6.0 * S**2 * np.asarray(theta_k) + 6.0 * S * np.asarray(comm_mse_window_sum) + 2.0 * delta**2


def past_window_sums(values, S: int) -> np.ndarray:
    """sum_{j=max(1,k-S)}^{k-1} values(j) for k = 1..K (values indexed from slot 1)."""
    v = np.asarray(values, float)
    c = np.concatenate([[0.0], np.cumsum(v)])
    k = np.arange(1, len(v) + 1)
    return c[k - 1] - c[np.maximum(k - S - 1, 0)]


def _log_terms(g: np.ndarray, params: BoundParams) -> tuple[np.ndarray, np.ndarray]:
    log_rho = np.log(contraction(g, params))
    # suffix[k] = sum_{k' > k} log rho_k'
    suffix = np.concatenate([np.cumsum(log_rho[::-1])[::-1][1:], [0.0]])
    with np.errstate(divide="ignore"):
        log_add = np.log(additive(g, params))
    return log_rho, log_add + suffix


def bound_from_g(g, params: BoundParams, gap_initial: float) -> BoundBreakdown:
    g = np.asarray(g, float)
    log_rho, log_terms = _log_terms(g, params)
    with np.errstate(divide="ignore"):
        log_init = float(np.log(gap_initial) + log_rho.sum()) if gap_initial > 0 else -np.inf
    log_asym = float(logsumexp(log_terms)) if g.size else -np.inf
    flagged = tuple(int(i) + 1 for i in np.flatnonzero(contraction(g, params) > 1.0))
    with np.errstate(over="ignore"):  # the linear values may overflow; the logs stay exact
        return BoundBreakdown(float(np.exp(log_init)), float(np.exp(log_asym)), log_init, log_asym, flagged)


def finite_horizon_bound(schedule: Schedule, scenario: Scenario, params: BoundParams,
                         gap_initial: float, n_slots: int | None = None) -> BoundBreakdown:
    """Bound on E[F(x(K+1)) - F*]; ``n_slots`` repeats the schedule periodically."""
    return bound_from_g(schedule_g_values(schedule, scenario, params, n_slots), params, gap_initial)


def log_asymptotic_objective(schedule: Schedule, scenario: Scenario, params: BoundParams,
                             n_slots: int | None = None) -> float:
    return bound_from_g(schedule_g_values(schedule, scenario, params, n_slots), params, 0.0).log_asymptotic


def asymptotic_objective(schedule: Schedule, scenario: Scenario, params: BoundParams,
                         n_slots: int | None = None) -> float:
    """sum_k additive_k prod_{k' > k} contraction_k' (may overflow to inf; see the log form)."""
    return bound_from_g(schedule_g_values(schedule, scenario, params, n_slots), params, 0.0).asymptotic
