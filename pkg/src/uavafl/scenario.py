"""Physical world: device placement, UAV kinematics and the LoS channel."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from uavafl.errors import ConfigurationError, ShapeError, SingularityError
from uavafl.seeding import substream

REL_TOL = 1e-9


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class Clusters:
    count: int
    radius: float


@dataclass(frozen=True)
class ScenarioParams:
    """Scenario constants in SI units. Defaults follow the reference setup."""

    area_side: float = 1000.0
    H: float = 100.0
    v_max: float = 50.0
    a_max: float = 15.0
    qF_xy: tuple[float, float] = (0.0, 0.0)
    g0: float = db_to_linear(-60.0)
    noise_power: float = dbm_to_watts(-80.0)
    P0: float = 0.1
    delta_t: float = 1.0
    K: int = 250
    compute_time: int | tuple[int, ...] = 0

    @classmethod
    def from_mapping(cls, cfg: Mapping[str, object]) -> "ScenarioParams":
        """Build from configuration keys; dB/dBm values are converted here."""
        kw: dict[str, object] = {}
        simple = {
            "area_side_m": ("area_side", float),
            "H_m": ("H", float),
            "v_max_mps": ("v_max", float),
            "a_max_mps2": ("a_max", float),
            "P0_W": ("P0", float),
            "delta_t_s": ("delta_t", float),
            "K_cycle": ("K", int),
        }
        for key, (attr, conv) in simple.items():
            if key in cfg:
                kw[attr] = conv(cfg[key])
        if "g0_dB" in cfg:
            kw["g0"] = db_to_linear(float(cfg["g0_dB"]))
        if "noise_dBm" in cfg:
            kw["noise_power"] = dbm_to_watts(float(cfg["noise_dBm"]))
        if "qF_xy" in cfg:
            kw["qF_xy"] = tuple(_floats(cfg["qF_xy"]))
            if len(kw["qF_xy"]) != 2:
                raise ConfigurationError("qF_xy needs two coordinates")
        if "compute_time_slots" in cfg:
            vals = [int(v) for v in _floats(cfg["compute_time_slots"])]
            kw["compute_time"] = vals[0] if len(vals) == 1 else tuple(vals)
        return cls(**kw)


def _floats(value: object) -> list[float]:
    if isinstance(value, (int, float)):
        return [float(value)]
    if isinstance(value, str):
        return [float(v) for v in value.replace(";", ",").split(",") if v.strip()]
    return [float(v) for v in value]  # type: ignore[union-attr]


@dataclass(frozen=True)
class DeviceSpec:
    id: int
    position: np.ndarray
    compute_time: int = 0
    cluster_id: int | None = None


@dataclass(frozen=True, eq=False)
class Scenario:
    devices: tuple[DeviceSpec, ...]
    area_side: float
    H: float
    v_max: float
    a_max: float
    q_F: np.ndarray
    g0: float
    noise_power: float
    P0: float
    delta_t: float
    K: int
    seed: int = 0
    los: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if not self.devices:
            raise ConfigurationError("scenario needs at least one device")
        for name in ("H", "v_max", "a_max", "P0", "noise_power", "g0", "delta_t"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive")
        if self.K < 1:
            raise ConfigurationError("K must be >= 1")
        for d in self.devices:
            p = d.position
            if p.shape != (3,) or p[2] != 0.0:
                raise ConfigurationError(f"device {d.id} must lie on the ground plane")
            if d.compute_time < 0:
                raise ConfigurationError(f"device {d.id} has negative compute time")
        if abs(self.q_F[2] - self.H) > REL_TOL * self.H:
            raise ConfigurationError("dispatch point must be at flight altitude")

    @property
    def M(self) -> int:
        return len(self.devices)

    @property
    def positions(self) -> np.ndarray:
        return np.stack([d.position for d in self.devices])

    @property
    def compute_times(self) -> np.ndarray:
        return np.array([d.compute_time for d in self.devices], dtype=int)

    @property
    def b_max(self) -> float:
        """Largest amplitude allowed by 2 b^2 <= P0."""
        return float(np.sqrt(self.P0 / 2.0))

    def los_set(self, k: int) -> np.ndarray:
        """Indices of devices with a LoS link in slot ``k`` (all, unless masked)."""
        if self.los is None:
            return np.arange(self.M)
        return np.flatnonzero(self.los[:, (k - 1) % self.los.shape[1]])

    def with_compute_times(self, c: Sequence[int] | int) -> "Scenario":
        c_arr = np.broadcast_to(np.asarray(c, dtype=int), (self.M,))
        devs = tuple(replace(d, compute_time=int(ci)) for d, ci in zip(self.devices, c_arr))
        return replace(self, devices=devs)

    def with_K(self, K: int) -> "Scenario":
        return replace(self, K=int(K))

    @classmethod
    def from_positions(cls, xy: np.ndarray, params: ScenarioParams | None = None,
                       seed: int = 0, compute_times: Sequence[int] | int | None = None,
                       cluster_ids: Sequence[int | None] | None = None) -> "Scenario":
        params = params or ScenarioParams()
        xy = np.atleast_2d(np.asarray(xy, dtype=float))
        M = xy.shape[0]
        c = _compute_times(params.compute_time if compute_times is None else compute_times, M, cluster_ids)
        devs = tuple(
            DeviceSpec(
                id=m,
                position=np.array([xy[m, 0], xy[m, 1], 0.0]),
                compute_time=int(c[m]),
                cluster_id=None if cluster_ids is None else cluster_ids[m],
            )
            for m in range(M)
        )
        return cls(
            devices=devs, area_side=params.area_side, H=params.H, v_max=params.v_max,
            a_max=params.a_max, q_F=np.array([params.qF_xy[0], params.qF_xy[1], params.H]),
            g0=params.g0, noise_power=params.noise_power, P0=params.P0,
            delta_t=params.delta_t, K=params.K, seed=seed,
        )


def _compute_times(spec, M: int, cluster_ids) -> np.ndarray:
    if isinstance(spec, (int, np.integer)):
        return np.full(M, int(spec))
    spec = [int(v) for v in spec]
    if cluster_ids is not None and all(c is not None for c in cluster_ids) and len(spec) != M:
        # one compute time per cluster
        return np.array([spec[c % len(spec)] for c in cluster_ids])
    if len(spec) != M:
        raise ConfigurationError(f"expected {M} compute times, got {len(spec)}")
    return np.array(spec)


def generate_scenario(seed: int, layout: str | Clusters, M: int,
                      params: ScenarioParams | None = None) -> Scenario:
    """Place ``M`` devices reproducibly.

    ``layout`` is ``"uniform"`` (uniform over the square area) or a
    :class:`Clusters` spec, in which case devices are dealt round-robin to
    ``count`` cluster centres and drawn uniformly within ``radius`` of them.
    """
    params = params or ScenarioParams()
    if M < 1:
        raise ConfigurationError("M must be >= 1")
    rng = substream(seed, "scenario")
    side = params.area_side
    if layout == "uniform":
        xy = rng.uniform(0.0, side, size=(M, 2))
        cluster_ids = None
    elif isinstance(layout, Clusters):
        if layout.count < 1:
            raise ConfigurationError("cluster count must be >= 1")
        if layout.radius < 0 or 2.0 * layout.radius > side:
            raise ConfigurationError(
                f"cluster radius {layout.radius} m does not fit in a {side} m area")
        centers = rng.uniform(layout.radius, side - layout.radius, size=(layout.count, 2))
        cluster_ids = [m % layout.count for m in range(M)]
        r = layout.radius * np.sqrt(rng.uniform(0.0, 1.0, size=M))
        phi = rng.uniform(0.0, 2.0 * np.pi, size=M)
        xy = centers[cluster_ids] + np.column_stack([r * np.cos(phi), r * np.sin(phi)])
        xy = np.clip(xy, 0.0, side)
    else:
        raise ConfigurationError(f"unknown layout {layout!r}")
    return Scenario.from_positions(xy, params, seed=seed, cluster_ids=cluster_ids)


def parse_layout(name: str, cluster_count: int | None = None,
                 cluster_radius: float | None = None) -> str | Clusters:
    if name == "uniform":
        return "uniform"
    if name in ("clusters", "cluster"):
        if cluster_count is None or cluster_radius is None:
            raise ConfigurationError("clusters layout needs cluster_count and cluster_radius_m")
        return Clusters(int(cluster_count), float(cluster_radius))
    raise ConfigurationError(f"unknown layout {name!r}")


def sigma_w(scenario: Scenario) -> float:
    """Spread metric: sum of device distances to their mean position."""
    w = scenario.positions
    return float(np.linalg.norm(w - w.mean(axis=0), axis=1).sum())


@dataclass(frozen=True, eq=False)
class Trajectory:
    """UAV positions q(0..K); slot k uses ``positions[k]``."""

    positions: np.ndarray

    @property
    def K(self) -> int:
        return self.positions.shape[0] - 1

    @classmethod
    def hover(cls, scenario: Scenario, K: int | None = None) -> "Trajectory":
        K = scenario.K if K is None else K
        return cls(np.tile(scenario.q_F, (K + 1, 1)))


@dataclass(frozen=True)
class Violation:
    kind: str  # velocity | acceleration | endpoint | altitude
    slot: int
    value: float
    limit: float


def validate_trajectory(scenario: Scenario, trajectory: Trajectory | np.ndarray,
                        K: int | None = None) -> list[Violation]:
    """List every breach of the speed, acceleration, endpoint and altitude limits."""
    q = trajectory.positions if isinstance(trajectory, Trajectory) else np.asarray(trajectory, float)
    K = scenario.K if K is None else K
    if q.ndim != 2 or q.shape != (K + 1, 3):
        raise ShapeError(f"trajectory must have shape ({K + 1}, 3), got {q.shape}")
    out: list[Violation] = []
    dt = scenario.delta_t
    v = np.diff(q, axis=0) / dt
    speed = np.linalg.norm(v, axis=1)
    for k in np.flatnonzero(speed > scenario.v_max * (1 + REL_TOL)):
        out.append(Violation("velocity", int(k), float(speed[k]), scenario.v_max))
    if K >= 2:
        acc = np.linalg.norm(np.diff(v, axis=0) / dt, axis=1)
        for k in np.flatnonzero(acc > scenario.a_max * (1 + REL_TOL)):
            out.append(Violation("acceleration", int(k), float(acc[k]), scenario.a_max))
    scale = max(1.0, float(np.linalg.norm(scenario.q_F)))
    for k in (0, K):
        err = float(np.linalg.norm(q[k] - scenario.q_F))
        if err > REL_TOL * scale:
            out.append(Violation("endpoint", k, err, 0.0))
    dz = np.abs(q[:, 2] - scenario.H)
    for k in np.flatnonzero(dz > REL_TOL * scenario.H):
        out.append(Violation("altitude", int(k), float(q[k, 2]), scenario.H))
    return out


@dataclass(frozen=True)
class ChannelRealization:
    magnitude: float
    phase: float


def distances(scenario: Scenario, positions: np.ndarray) -> np.ndarray:
    """Device-to-UAV distances, shape (M, n) for ``positions`` of shape (n, 3)."""
    positions = np.atleast_2d(positions)
    d = np.linalg.norm(positions[None, :, :] - scenario.positions[:, None, :], axis=2)
    if np.any(d <= 0.0):
        raise SingularityError("UAV position coincides with a device")
    return d


def channel_magnitudes(scenario: Scenario, positions: np.ndarray) -> np.ndarray:
    """|h_m(k)| = sqrt(g0) / d_m(k), shape (M, n)."""
    return np.sqrt(scenario.g0) / distances(scenario, positions)


def channel_phases(seed: int, M: int, n_slots: int) -> np.ndarray:
    """I.i.d. uniform phases in [0, 2*pi), shape (M, n_slots), from the phase substream."""
    return substream(seed, "phase").uniform(0.0, 2.0 * np.pi, size=(M, n_slots))


def channel(scenario: Scenario, q: np.ndarray, m: int,
            rng: np.random.Generator | None = None) -> ChannelRealization:
    d = float(np.linalg.norm(np.asarray(q, float) - scenario.devices[m].position))
    if d <= 0.0:
        raise SingularityError(f"UAV position coincides with device {m}")
    rng = rng if rng is not None else substream(scenario.seed, "phase", m)
    return ChannelRealization(float(np.sqrt(scenario.g0) / d), float(rng.uniform(0.0, 2.0 * np.pi)))
