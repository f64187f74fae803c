"""Empirical estimation of the gradient-growth and device-spread constants."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from uavafl.afl.tasks import LearningTask
from uavafl.params import BoundParams
from uavafl.seeding import substream


@dataclass(frozen=True)
class AssumptionConstants:
    delta: float
    alpha1: float
    alpha2: float
    mu: float
    L: float
    max_ratio: float  # max ||grad F(old)||^2 / (alpha1 + alpha2 ||grad F(new)||^2) over probes
    n_points: int

    def to_params(self, S: int, lr: float | None = None) -> BoundParams:
        return BoundParams(mu=self.mu, L=self.L, delta=self.delta, alpha1=self.alpha1,
                           alpha2=self.alpha2, S=S, lr=lr)


def probe_trajectories(task: LearningTask, S: int, probe_budget: int, seed: int = 0,
                       lr: float | None = None) -> list[np.ndarray]:
    """Delayed-gradient descent paths from the task's start and random restarts.

    Each path applies gradients that are up to ``S`` steps old, which mimics
    the iterates an asynchronous run visits.
    """
    rng = substream(seed, "probe")
    _, L = task.curvature()
    lr = 1.0 / L if lr is None else lr
    radius = float(np.linalg.norm(task.x0 - task.x_star)) or 1.0
    n_paths = max(1, probe_budget // max(1, 4 * S))
    steps = max(2, probe_budget // n_paths)
    out = []
    for i in range(n_paths):
        if i == 0:
            x = np.array(task.x0, float)
        else:
            d = rng.standard_normal(task.D)
            x = task.x_star + radius * d / np.linalg.norm(d)
        path = [x.copy()]
        for t in range(steps - 1):
            lag = int(rng.integers(0, S + 1))
            x = x - lr / (S + 1) * task.gradient(path[max(0, t - lag)])
            path.append(x.copy())
        out.append(np.array(path))
    return out


def estimate_assumption_constants(task: LearningTask, S: int, probe_budget: int = 400,
                                  alpha2: float = 0.1, trajectories=None, seed: int = 0,
                                  include_probes: bool = True) -> AssumptionConstants:
    """Smallest delta and alpha1 (for the given alpha2) consistent with every probe.

    delta^2 = max_m,x ||grad f_m(x) - grad F(x)||^2 over all probed points;
    alpha1 = max (||grad F(x_old)||^2 - alpha2 ||grad F(x_new)||^2)_+ over
    pairs on one trajectory at most 2S apart.
    """
    mu, L = task.curvature()
    paths = [np.atleast_2d(np.asarray(t, float)) for t in (trajectories or [])]
    if include_probes or not paths:
        paths += probe_trajectories(task, S, probe_budget, seed)
    delta2 = 0.0
    alpha1 = 0.0
    pairs = []
    n_points = 0
    for path in paths:
        G = np.stack([task.local_gradients(x) for x in path])  # (n, M, D)
        full = G.mean(axis=1)
        delta2 = max(delta2, float(np.max(np.sum((G - full[:, None, :]) ** 2, axis=2))))
        sq = np.sum(full**2, axis=1)
        n = len(path)
        n_points += n
        lag = min(2 * S, n - 1)
        for a in range(lag + 1):
            old, new = sq[: n - a], sq[a:]
            alpha1 = max(alpha1, float(np.max(old - alpha2 * new)))
            pairs.append((old, new))
    alpha1 = max(alpha1, 0.0)
    ratio = 0.0
    for old, new in pairs:
        den = alpha1 + alpha2 * new
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(den > 0, old / np.where(den > 0, den, 1.0), np.where(old > 0, np.inf, 0.0))
        ratio = max(ratio, float(np.max(r)))
    return AssumptionConstants(delta=float(np.sqrt(delta2)), alpha1=alpha1, alpha2=alpha2,
                               mu=mu, L=L, max_ratio=ratio, n_points=n_points)
