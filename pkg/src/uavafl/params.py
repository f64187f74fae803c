"""Constants of the convergence analysis (smoothness, convexity, staleness...)."""

from __future__ import annotations

from dataclasses import dataclass, replace

from uavafl.errors import ConfigurationError


@dataclass(frozen=True)
class BoundParams:
    """mu, L: strong convexity / smoothness of F; delta: device-gradient spread;
    alpha1, alpha2: stale-gradient growth constants; S: staleness bound;
    lr: learning rate (defaults to 1/L)."""

    mu: float = 0.2
    L: float = 10.0
    delta: float = 20.0
    alpha1: float = 100.0
    alpha2: float = 0.1
    S: int = 50
    lr: float | None = None

    def __post_init__(self):
        if not (0 < self.mu <= self.L):
            raise ConfigurationError("need 0 < mu <= L")
        if self.S < 1:
            raise ConfigurationError("S must be >= 1")
        if self.alpha2 < 0 or self.alpha1 < 0 or self.delta < 0:
            raise ConfigurationError("alpha1, alpha2, delta must be non-negative")

    @property
    def learning_rate(self) -> float:
        return 1.0 / self.L if self.lr is None else self.lr

    def with_(self, **kw) -> "BoundParams":
        return replace(self, **kw)
