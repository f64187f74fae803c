"""Over-the-air gradient aggregation and its communication-MSE analytics.

The chain is normalize -> modulate -> precode (b e^{-j theta}) -> channel
superposition + AWGN -> denoise (zeta) -> demodulate -> add back the mean.
All array routines operate on the trailing axes so that Monte-Carlo trials
can be stacked along leading axes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from uavafl.errors import ConfigurationError, ShapeError

POWER_TOL = 1e-12


@dataclass(frozen=True)
class NormalizedGradient:
    tilde: np.ndarray
    mean: float
    variance: float

    @property
    def degenerate(self) -> bool:
        return self.variance <= 0.0


@dataclass(frozen=True)
class TransceiverConfig:
    amplitudes: np.ndarray
    zeta: float
    slot: int = 0

    def check_power(self, P0: float) -> None:
        check_power(self.amplitudes, P0)


@dataclass(frozen=True)
class AggregationResult:
    estimate: np.ndarray
    true_mean: np.ndarray
    comm_error: np.ndarray
    analytic_mse: float
    zeta: float


def check_power(amplitudes: np.ndarray, P0: float) -> None:
    b = np.asarray(amplitudes, dtype=float)
    if np.any(b < 0):
        raise ConfigurationError("amplitudes must be non-negative")
    if np.any(2.0 * b**2 > P0 * (1.0 + POWER_TOL)):
        raise ConfigurationError(f"power constraint 2 b^2 <= P0 = {P0} violated")


def _check_even(D: int) -> None:
    if D < 2 or D % 2:
        raise ShapeError(f"gradient dimension must be even and >= 2, got {D}")


def normalize_array(g: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(tilde, mean, variance) along the last axis; zero-variance rows map to 0."""
    g = np.asarray(g, dtype=float)
    _check_even(g.shape[-1])
    mean = g.mean(axis=-1)
    centred = g - mean[..., None]
    var = np.mean(centred**2, axis=-1)
    safe = np.where(var > 0.0, np.sqrt(np.where(var > 0.0, var, 1.0)), 1.0)
    tilde = np.where((var > 0.0)[..., None], centred / safe[..., None], 0.0)
    return tilde, mean, var


def normalize(gradient: np.ndarray) -> NormalizedGradient:
    g = np.asarray(gradient, dtype=float)
    if g.ndim != 1:
        raise ShapeError("normalize expects a single gradient vector")
    tilde, mean, var = normalize_array(g)
    return NormalizedGradient(tilde=tilde, mean=float(mean), variance=float(var))


def reconstruct(ng: NormalizedGradient) -> np.ndarray:
    return ng.tilde * np.sqrt(max(ng.variance, 0.0)) + ng.mean


def modulate(tilde: np.ndarray) -> np.ndarray:
    """First half of the vector -> real parts, second half -> imaginary parts."""
    tilde = np.asarray(tilde, dtype=float)
    _check_even(tilde.shape[-1])
    C = tilde.shape[-1] // 2
    return tilde[..., :C] + 1j * tilde[..., C:]


def demodulate(r: np.ndarray) -> np.ndarray:
    r = np.asarray(r)
    return np.concatenate([r.real, r.imag], axis=-1)


def optimal_zeta(magnitudes, amplitudes, variances, noise_power: float) -> float:
    """MSE-minimizing denoising factor for one slot."""
    h = np.asarray(magnitudes, dtype=float)
    b = np.asarray(amplitudes, dtype=float)
    v = np.asarray(variances, dtype=float)
    n = h.size
    if n == 0:
        raise ConfigurationError("denoising factor undefined for an empty selection")
    num = np.sum(np.sqrt(v) / n * h * b)
    den = np.sum(h**2 * b**2) + noise_power / 2.0
    if den <= 0.0:
        if num == 0.0:
            return 0.0
        raise ConfigurationError("denoising factor undefined: zero received power and zero noise")
    return float(num / den)


def _optimal_zeta_batch(h, b, v, noise_power):
    n = h.shape[-1]
    num = np.sum(np.sqrt(v) / n * h * b, axis=-1)
    den = np.sum(h**2 * b**2, axis=-1) + noise_power / 2.0
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(den > 0.0, num / np.where(den > 0.0, den, 1.0), 0.0)


def analytic_comm_mse(magnitudes, amplitudes, variances, zeta: float,
                      noise_power: float, C: int) -> float:
    """C * (sum_m 2 Delta_m^2 + zeta^2 sigma^2) with Delta_m = sqrt(v_m)/n - zeta |h_m| b_m."""
    h = np.asarray(magnitudes, dtype=float)
    n = h.size
    if n == 0:
        return 0.0
    b = np.asarray(amplitudes, dtype=float)
    v = np.asarray(variances, dtype=float)
    # non-transmitting (zero-variance) devices carry no symbol energy
    active = v > 0.0
    delta = np.sqrt(v) / n - zeta * h * b
    return float(C * (2.0 * np.sum(delta[active] ** 2) + zeta**2 * noise_power))


def received_fraction(magnitudes, amplitudes, noise_power: float) -> float:
    """(sum |h| b)^2 / (sum |h|^2 b^2 + sigma^2 / 2); zero for an empty slot."""
    x = np.asarray(magnitudes, dtype=float) * np.asarray(amplitudes, dtype=float)
    if x.size == 0:
        return 0.0
    return float(np.sum(x) ** 2 / (np.sum(x**2) + noise_power / 2.0))


def comm_mse_equal_variance(magnitudes, amplitudes, variance: float,
                            noise_power: float, C: int) -> float:
    """Exact MSE at the optimal zeta when every device has variance ``variance``."""
    n = np.size(magnitudes)
    if n == 0:
        return 0.0
    eps = received_fraction(magnitudes, amplitudes, noise_power)
    return float(2.0 * C * variance / n**2 * (n - eps))


def comm_mse_bound(magnitudes, amplitudes, noise_power: float, theta: float) -> float:
    """Theta(k) * [|M_k| - (sum |h| b)^2 / (sum |h|^2 b^2 + sigma^2/2)]."""
    n = np.size(magnitudes)
    if n == 0:
        return 0.0
    return float(theta * (n - received_fraction(magnitudes, amplitudes, noise_power)))


def aggregate_chain(gradients, magnitudes, phases, amplitudes, noise, zeta=None,
                    noise_power: float = 0.0):
    """Run the full transceiver chain.

    ``gradients`` has shape (..., n, D); ``noise`` is complex with shape
    (..., C) (already scaled). Returns ``(estimate, true_mean, zeta)``, where
    ``zeta`` defaults to the per-trial MSE optimum.
    """
    G = np.asarray(gradients, dtype=float)
    tilde, mean, var = normalize_array(G)
    h = np.asarray(magnitudes, dtype=float)
    theta = np.asarray(phases, dtype=float)
    b = np.where(var > 0.0, np.asarray(amplitudes, dtype=float), 0.0)
    if zeta is None:
        zeta = _optimal_zeta_batch(h, b, var, noise_power)
    zeta = np.asarray(zeta, dtype=float)
    r = modulate(tilde)
    s = (b * np.exp(-1j * theta))[..., None] * r
    chan = h * np.exp(1j * theta)
    y = np.sum(chan[..., None] * s, axis=-2) + noise
    r_hat = zeta[..., None] * y
    estimate = demodulate(r_hat) + mean.mean(axis=-1)[..., None]
    return estimate, G.mean(axis=-2), zeta


def complex_noise(rng: np.random.Generator, noise_power: float, shape) -> np.ndarray:
    """Circularly-symmetric complex Gaussian with E|n|^2 = noise_power."""
    s = np.sqrt(noise_power / 2.0)
    return s * rng.standard_normal(shape) + 1j * s * rng.standard_normal(shape)


def transmit_and_aggregate(gradients, magnitudes, phases, config: TransceiverConfig | None,
                           noise_power: float, rng: np.random.Generator,
                           P0: float | None = None, amplitudes=None) -> AggregationResult:
    """One slot of over-the-air aggregation for the selected devices.

    ``config.zeta`` is used when a config is supplied; pass ``config=None`` with
    ``amplitudes`` to use the MSE-optimal denoising factor.
    """
    G = np.atleast_2d(np.asarray(gradients, dtype=float))
    n, D = G.shape
    _check_even(D)
    h = np.asarray(magnitudes, dtype=float)
    if h.shape != (n,) or np.shape(phases) != (n,):
        raise ShapeError("one channel per selected device required")
    b = np.asarray(config.amplitudes if config is not None else amplitudes, dtype=float)
    if b.shape != (n,):
        raise ShapeError("one amplitude per selected device required")
    if P0 is not None:
        check_power(b, P0)
    _, _, var = normalize_array(G)
    b_eff = np.where(var > 0.0, b, 0.0)
    zeta = config.zeta if config is not None else optimal_zeta(h, b_eff, var, noise_power)
    noise = complex_noise(rng, noise_power, (D // 2,))
    est, g, _ = aggregate_chain(G, h, phases, b, noise, zeta=np.float64(zeta))
    return AggregationResult(
        estimate=est, true_mean=g, comm_error=g - est,
        analytic_mse=analytic_comm_mse(h, b_eff, var, zeta, noise_power, D // 2),
        zeta=float(zeta),
    )


def nmse_db(estimate, true) -> float:
    """10 log10(||estimate - true||^2 / ||true||^2); ``-inf`` when exact."""
    g = np.asarray(true, dtype=float)
    den = float(np.sum(g**2))
    if den == 0.0:
        raise ConfigurationError("NMSE undefined for a zero true gradient")
    num = float(np.sum((np.asarray(estimate, dtype=float) - g) ** 2))
    if num == 0.0:
        return float("-inf")
    return float(10.0 * np.log10(num / den))
