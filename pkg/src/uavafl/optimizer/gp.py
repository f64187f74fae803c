"""Log-sum-exp recast of the horizon objective.

With p_k >= additive(g_k), p_{K+k} >= contraction(g_k) and p <= exp(y), the
objective sum_k p_k prod_{k'>k} p_{K+k'} becomes log sum_k exp(c_k^T y).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from uavafl.bound import additive, contraction
from uavafl.params import BoundParams


def selector_matrix(K: int) -> np.ndarray:
    """Rows c_k: ones at index k and at K + k + 1 .. 2K (1-based)."""
    C = np.zeros((K, 2 * K))
    for k in range(K):
        C[k, k] = 1.0
        C[k, K + k + 1:] = 1.0
    return C


def lower_limits(g, params: BoundParams) -> np.ndarray:
    """Smallest feasible p for per-slot g values (length 2K)."""
    g = np.asarray(g, float)
    return np.concatenate([additive(g, params), contraction(g, params)])


def g_caps(p, params: BoundParams) -> np.ndarray:
    """Largest g compatible with p: min of the two caps it implies."""
    p = np.asarray(p, float)
    K = p.size // 2
    d2 = params.delta**2
    cap1 = (2.0 * params.L * p[:K] - 6.0 * d2) / (d2 + params.alpha1) if d2 + params.alpha1 > 0 else np.inf
    cap2 = ((params.L * p[K:] + params.mu - params.L) / (params.mu * params.alpha2)
            if params.alpha2 > 0 else np.where(params.L * p[K:] + params.mu - params.L >= 0, np.inf, -np.inf))
    return np.minimum(cap1, cap2)


@dataclass(frozen=True)
class GPTransform:
    K: int
    params: BoundParams
    C: np.ndarray

    def objective(self, y) -> float:
        return float(logsumexp(self.C @ np.asarray(y, float)))

    def feasible(self, g, p, y, tol: float = 1e-9) -> bool:
        p = np.asarray(p, float)
        lo = lower_limits(g, self.params)
        return bool(np.all(p >= lo * (1 - tol)) and np.all(p <= np.exp(y) * (1 + tol))
                    and np.all(np.asarray(g) <= g_caps(p, self.params) * (1 + tol) + tol))

    def tight(self, g) -> tuple[np.ndarray, np.ndarray]:
        """(p, y) with every constraint active."""
        p = lower_limits(g, self.params)
        return p, np.log(p)

    def original(self, g) -> float:
        """log of sum_k additive_k prod_{k'>k} contraction_k' computed directly."""
        p, _ = self.tight(g)
        K = self.K
        total = 0.0
        for k in range(K):
            total += p[k] * np.prod(p[K + k + 1:])
        return float(np.log(total))


def gp_transform(spec) -> GPTransform:
    return GPTransform(spec.K, spec.params, selector_matrix(spec.K))
