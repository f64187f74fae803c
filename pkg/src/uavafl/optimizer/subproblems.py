"""Blocks of the alternating scheme.

* slack update for the binary-penalty auxiliaries (closed form);
* selection block: SCA over A with the log-sum-exp objective;
* trajectory block: convex restriction over Q via a variational form of the
  per-slot received-power term, followed by an exact per-slot amplitude
  optimization.

The selection block is built once as a parametrized cvxpy problem and
re-solved with updated expansion points; the trajectory block is rebuilt per
solve over the selected pairs.
"""

from __future__ import annotations

import cvxpy as cp
import numpy as np

from uavafl.bound import bound_from_g, g_values
from uavafl.optimizer.gp import lower_limits, selector_matrix
from uavafl.optimizer.problem import ProblemSpec
from uavafl.optimizer.solver import SubproblemSolution, convex_solve
from uavafl.scenario import channel_magnitudes
from uavafl.trajectory import UNIT, finalize, mechanics_constraints

WINDOW_MARGIN = 1e-7  # keeps fractional iterates inside the windows after clipping


def slack_update(A) -> np.ndarray:
    """Minimizer over abar of [a(1 - abar)]^2 + (a - abar)^2."""
    A = np.asarray(A, float)
    return (A**2 + A) / (1.0 + A**2)


def penalty(A, Abar) -> float:
    A = np.asarray(A, float)
    Abar = np.asarray(Abar, float)
    return float(np.sum((A * (1.0 - Abar)) ** 2 + (A - Abar) ** 2))


def binary_violation(A, Abar) -> float:
    """Total violation of a(1 - abar) = 0 and a = abar."""
    A = np.asarray(A, float)
    Abar = np.asarray(Abar, float)
    return float(np.sum(np.abs(A * (1.0 - Abar)) + np.abs(A - Abar)))


def max_fractional(A) -> float:
    A = np.asarray(A, float)
    return float(np.max(np.minimum(np.abs(A), np.abs(1.0 - A)))) if A.size else 0.0


def log_objective(spec: ProblemSpec, A, B, Q) -> float:
    """log of the asymptotic objective for slot positions Q[1:]."""
    g = g_values(A, B, np.asarray(Q)[1:], spec.scenario, spec.params)
    return bound_from_g(g, spec.params, 0.0).log_asymptotic


def penalized_objective(spec: ProblemSpec, A, Abar, B, Q, eta: float) -> float:
    return log_objective(spec, A, B, Q) + penalty(A, Abar) / eta


def _noise_unit(spec: ProblemSpec) -> float:
    return float(np.sqrt(spec.noise_power / 2.0))


def optimal_scaled_zeta(weights, xmax) -> np.ndarray:
    """Per-slot minimizer of sum_m a_m max(0, 1 - z x_m)^2 + z^2 over z >= 0.

    ``weights`` and ``xmax`` are (M, K); received amplitudes are in units of
    the noise standard deviation per real dimension. The objective is a
    strictly convex piecewise quadratic whose active terms at the optimum are
    the devices with the smallest x, so every prefix of the sorted x gives a
    closed-form candidate and exactly one is self-consistent.
    """
    a = np.asarray(weights, float)
    x = np.asarray(xmax, float)
    order = np.argsort(x, axis=0, kind="stable")
    xs = np.take_along_axis(x, order, axis=0)
    ws = np.take_along_axis(a, order, axis=0)
    zero = np.zeros((1, x.shape[1]))
    s1 = np.vstack([zero, np.cumsum(ws * xs, axis=0)])
    s2 = np.vstack([zero, np.cumsum(ws * xs**2, axis=0)])
    z = s1 / (1.0 + s2)  # candidate with the p smallest x active, p = 0..M
    below = np.vstack([zero - 1.0, xs]) * z < 1.0  # last active term still active
    above = np.vstack([xs * z[:-1] >= 1.0, np.ones_like(zero, bool)])  # next term stays inactive
    # ties and rounding can make several prefixes pass; they give the same z up to rounding
    p = np.argmax(below & above, axis=0)
    return z[p, np.arange(x.shape[1])]


def polish_amplitudes(spec: ProblemSpec, A, Q) -> np.ndarray:
    """Exact per-slot optimal amplitudes for fixed selection and trajectory.

    Minimizing sum a - eps over b in [0, b_max] equals minimizing over z the
    function above with x = |h| b_max, then b = min(1 / (z |h|), b_max).
    Unselected devices keep full power.
    """
    A = np.asarray(A, float)
    bmax = spec.scenario.b_max
    unit = _noise_unit(spec)
    h = channel_magnitudes(spec.scenario, np.asarray(Q)[1:]) / unit
    z = optimal_scaled_zeta(A, h * bmax)
    with np.errstate(divide="ignore"):
        b = np.where(z > 0, np.minimum(1.0 / (z * h), bmax), bmax)
    return np.where(A > 0, b, bmax)


def epsilon_linearization(A_t, v) -> tuple[np.ndarray, np.ndarray]:
    """(value, gradient) of eps(a) = (a.v)^2 / (a.(v*v) + 1) at each column of A_t.

    ``v`` is |h| b in noise units. eps is convex in a, so the linearization
    is a global under-estimator.
    """
    A_t = np.asarray(A_t, float)
    s = np.sum(A_t * v, axis=0)
    den = np.sum(A_t * v**2, axis=0) + 1.0
    value = s**2 / den
    upsilon = 2.0 * v * s / den
    xi = -(s**2) * v**2 / den**2
    return value, upsilon + xi


def _g_window(K: int, S: int) -> np.ndarray:
    W = np.zeros((K, K))
    for k in range(K):
        W[k, max(0, k - S):k + 1] = 1.0
    return W


def _y_constraints(spec: ProblemSpec, y, f, yt, ey) -> list:
    p = spec.params
    K = spec.K
    d2 = p.delta**2
    add = (d2 + p.alpha1) / (2 * p.L) * f + 3 * d2 / p.L
    con = 1 - p.mu / p.L + p.mu / p.L * p.alpha2 * f
    return [y[:K] >= yt[:K] - 1 + cp.multiply(ey[:K], add),
            y[K:] >= yt[K:] - 1 + cp.multiply(ey[K:], con)]


class SelectionBlock:
    """SCA subproblem over (A, y, f, d) with trajectory and amplitudes fixed."""

    def __init__(self, spec: ProblemSpec, extra_bounds: bool = False):
        M, K, S = spec.M, spec.K, spec.params.S
        self.spec = spec
        self.A = cp.Variable((M, K))
        self.y = cp.Variable(2 * K)
        self.f = cp.Variable(K)
        self.d = cp.Variable(K)
        self.pq = cp.Parameter((M, K), nonneg=True)
        self.pl = cp.Parameter((M, K))
        self.yt = cp.Parameter(2 * K)
        self.ey = cp.Parameter(2 * K, nonneg=True)
        self.r0 = cp.Parameter(K)
        self.W = cp.Parameter((M, K))
        self.lo = cp.Parameter((M, K))
        self.hi = cp.Parameter((M, K))
        n = cp.sum(self.A, axis=0)
        cons = [self.A >= self.lo, self.A <= self.hi]
        if spec.stale_windows.shape[0]:
            cons.append(self.A @ spec.stale_windows.T >= 1 + WINDOW_MARGIN)
        for rows, Wb in spec.busy_windows.values():
            if Wb.shape[0]:
                cons.append(self.A[rows, :] @ Wb.T <= 1 - WINDOW_MARGIN)
        cons += [
            self.f >= 18 * S**2 + 24 / M**2 * cp.square(M - n) + 18 * S * (_g_window(K, S) @ (n - self.d)),
            self.d <= self.r0 + cp.sum(cp.multiply(self.W, self.A), axis=0),
        ]
        cons += _y_constraints(spec, self.y, self.f, self.yt, self.ey)
        obj = (cp.log_sum_exp(selector_matrix(K) @ self.y)
               + cp.sum(cp.multiply(self.pq, cp.square(self.A))) + cp.sum(cp.multiply(self.pl, self.A)))
        self.problem = cp.Problem(cp.Minimize(obj), cons)

    def solve(self, A_t, Abar, B, Q, eta: float, y_t, bounds=None) -> SubproblemSolution:
        spec = self.spec
        v = channel_magnitudes(spec.scenario, np.asarray(Q)[1:]) * B / _noise_unit(spec)
        val, grad = epsilon_linearization(A_t, v)
        self.W.value = grad
        self.r0.value = val - np.sum(grad * A_t, axis=0)
        self.pq.value = ((1.0 - Abar) ** 2 + 1.0) / eta
        self.pl.value = -2.0 * Abar / eta
        self.yt.value = y_t
        self.ey.value = np.exp(-y_t)
        lo, hi = bounds if bounds is not None else (np.zeros_like(A_t), np.ones_like(A_t))
        self.lo.value, self.hi.value = lo, hi
        sol = convex_solve(self.problem, {"A": self.A, "y": self.y, "f": self.f, "d": self.d})
        sol.objective += float(np.sum(Abar**2)) / eta
        return sol


class TrajectoryBlock:
    """Convex restriction over (Q, y, f) with selection fixed.

    Per slot, sum a - eps = min over z of sum_m a_m (1 - e_m)^2 + z^2 with
    e_m = z |h_m| b_m (noise units). Amplitudes at full power give
    e_m ||q - w_m|| <= z kappa, and the bilinear left side is bounded by
    (gamma e^2 + ||q - w||^2 / gamma) / 2, tight at gamma = d / e.
    """

    E_FLOOR = 1e-6

    def __init__(self, spec: ProblemSpec):
        sc = spec.scenario
        self.spec = spec
        self.kappa = float(np.sqrt(sc.g0 * sc.P0 / 2.0) / _noise_unit(spec) / UNIT)
        self.g_window = _g_window(spec.K, spec.params.S)

    def build(self, A, gamma, y_t) -> tuple[cp.Problem, cp.Variable]:
        """The restriction at one expansion point, over the selected (device, slot) pairs only.

        Rebuilt per solve: the selected pairs change the structure, and a
        problem over just those pairs compiles faster than a parametrized one
        over every pair.
        """
        spec = self.spec
        sc = spec.scenario
        M, K, S = spec.M, spec.K, spec.params.S
        A = np.asarray(A, float)
        dev, slot = np.nonzero(A > 0)
        slots, pos = np.unique(slot, return_inverse=True)
        q = cp.Variable((K + 1, 2))
        cons = mechanics_constraints(q, sc, K, sc.q_F[:2])
        t_full = 0.0
        if dev.size:
            e = cp.Variable(dev.size, nonneg=True)
            z = cp.Variable(slots.size, nonneg=True)
            t = cp.Variable(slots.size)
            w = sc.positions[dev, :2] / UNIT
            d2 = cp.sum(cp.square(q[1 + slot] - w), axis=1) + (sc.H / UNIT) ** 2
            g = gamma[dev, slot]
            cons.append(0.5 * (cp.multiply(g, cp.square(e)) + cp.multiply(1.0 / g, d2)) <= self.kappa * z[pos])
            group = np.zeros((slots.size, dev.size))
            group[pos, np.arange(dev.size)] = A[dev, slot]
            cons.append(t >= group @ cp.square(1 - e) + cp.square(z))
            spread = np.zeros((K, slots.size))
            spread[slots, np.arange(slots.size)] = 1.0
            t_full = spread @ t
        n = A.sum(axis=0)
        y = cp.Variable(2 * K)
        f = cp.Variable(K)
        cons.append(f >= 18 * S**2 + 24 * ((M - n) / M) ** 2 + 18 * S * (self.g_window @ t_full))
        cons += _y_constraints(spec, y, f, y_t, np.exp(-y_t))
        return cp.Problem(cp.Minimize(cp.log_sum_exp(selector_matrix(K) @ y)), cons), q

    def expansion_point(self, A, B, Q) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(e, z, d) of the current iterate, in solver units."""
        spec = self.spec
        h = channel_magnitudes(spec.scenario, np.asarray(Q)[1:]) / _noise_unit(spec)
        x = h * B
        z = np.sum(A * x, axis=0) / (np.sum(A * x**2, axis=0) + 1.0)
        e = z * x
        d = np.sqrt(np.sum((np.asarray(Q)[1:, None, :2] - spec.scenario.positions[None, :, :2]) ** 2, axis=2)
                    + spec.scenario.H**2).T / UNIT
        return e, z, d

    def solve(self, A, B, Q, y_t) -> SubproblemSolution:
        e, _, d = self.expansion_point(A, B, Q)
        active = np.asarray(A) > 0
        gamma = np.where(active, d / np.maximum(e, self.E_FLOOR), 1.0)
        problem, q = self.build(A, gamma, np.asarray(y_t, float))
        q.value = np.asarray(Q)[:, :2] / UNIT
        sol = convex_solve(problem, {"q": q})
        sol.variables["Q"] = finalize(self.spec.scenario, sol.variables["q"] * UNIT)
        return sol


def tight_y(spec: ProblemSpec, A, B, Q) -> np.ndarray:
    g = g_values(A, B, np.asarray(Q)[1:], spec.scenario, spec.params)
    return np.log(lower_limits(g, spec.params))
