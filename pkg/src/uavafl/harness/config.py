"""Plain-text key/value experiment configuration.

Lines are ``key = value`` (``:`` also works); ``#`` and ``;`` start comments.
Lists are comma separated. Unknown keys are rejected so typos surface early.
"""

from __future__ import annotations

import configparser
from dataclasses import asdict, dataclass, field
from pathlib import Path

from uavafl.errors import ConfigurationError
from uavafl.params import BoundParams
from uavafl.seeding import derive_seed
from uavafl.scenario import Scenario, ScenarioParams, generate_scenario, parse_layout

_SECTION = "experiment"

SCENARIO_KEYS = ("area_side_m", "H_m", "v_max_mps", "a_max_mps2", "qF_xy", "g0_dB", "noise_dBm",
                 "P0_W", "delta_t_s", "K_cycle", "compute_time_slots")


def _items(text: str) -> list[str]:
    return [v.strip() for v in str(text).split(",") if v.strip()]


@dataclass(frozen=True)
class ExperimentConfig:
    # scenario
    M: int = 6
    layout: str = "uniform"
    cluster_count: int | None = None
    cluster_radius_m: float | None = None
    K: int = 2400  # training slots; the optimized cycle of K_cycle slots repeats
    seed: int = 0
    scenario: dict = field(default_factory=lambda: {"K_cycle": "120", "compute_time_slots": "3,3,3,15,15,15"})
    # convergence constants
    S: int = 40
    mu: float = 2.0
    L: float = 10.0
    delta: float = 20.0
    alpha1: float = 100.0
    alpha2: float = 0.1
    lr: float | None = 0.05
    # learning task
    task: str = "quadratic"
    dim: int = 10
    heterogeneity: float = 0.1
    # experiment
    trials: int = 1
    strategies: tuple[str, ...] = ("uav_afl", "error_free", "cf", "sfhf", "hga", "fafl")
    workers: int = 1
    eval_window: int = 50
    # optimizer
    eps1: float = 1e-2
    eps2: float = 1.0
    eta0: float = 10.0
    eta_decay: float = 0.5
    max_outer: int = 15
    max_inner: int = 20

    def __post_init__(self):
        if self.M < 1:
            raise ConfigurationError("M must be >= 1")
        if self.trials < 1:
            raise ConfigurationError("trials must be >= 1")
        if self.K < 1:
            raise ConfigurationError("K must be >= 1")
        if self.task not in ("quadratic", "logistic"):
            raise ConfigurationError(f"task must be quadratic or logistic, got {self.task!r}")
        if self.workers < 1:
            raise ConfigurationError("workers must be >= 1")
        parse_layout(self.layout, self.cluster_count, self.cluster_radius_m)
        self.scenario_params()
        self.bound_params()

    def scenario_params(self) -> ScenarioParams:
        return ScenarioParams.from_mapping(self.scenario)

    def bound_params(self) -> BoundParams:
        return BoundParams(mu=self.mu, L=self.L, delta=self.delta, alpha1=self.alpha1,
                           alpha2=self.alpha2, S=self.S, lr=self.lr)

    @property
    def K_cycle(self) -> int:
        return self.scenario_params().K

    def make_scenario(self, seed: int) -> Scenario:
        layout = parse_layout(self.layout, self.cluster_count, self.cluster_radius_m)
        return generate_scenario(seed, layout, self.M, self.scenario_params())

    def solver_kw(self) -> dict:
        return {"eps1": self.eps1, "eps2": self.eps2, "eta0": self.eta0, "s": self.eta_decay,
                "max_outer": self.max_outer, "max_inner": self.max_inner}

    def to_mapping(self) -> dict[str, str]:
        out = {}
        for k, v in asdict(self).items():
            if k == "scenario":
                out.update({sk: str(sv) for sk, sv in v.items()})
            elif isinstance(v, tuple):
                out[k] = ",".join(str(x) for x in v)
            elif v is not None:
                out[k] = str(v)
        return out

    def to_text(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in self.to_mapping().items())


_CONVERT = {
    "M": int, "K": int, "seed": int, "S": int, "trials": int, "workers": int, "eval_window": int,
    "cluster_count": int, "cluster_radius_m": float, "dim": int, "max_outer": int, "max_inner": int,
    "mu": float, "L": float, "delta": float, "alpha1": float, "alpha2": float, "heterogeneity": float,
    "eps1": float, "eps2": float, "eta0": float, "eta_decay": float,
    "layout": str, "task": str,
    "lr": lambda v: None if str(v).strip().lower() in ("", "none", "auto") else float(v),
    "strategies": lambda v: tuple(_items(v)),
}


def config_from_mapping(cfg: dict) -> ExperimentConfig:
    kw: dict = {}
    scenario: dict = {}
    for key, value in cfg.items():
        if key in SCENARIO_KEYS:
            scenario[key] = str(value)
        elif key in _CONVERT:
            try:
                kw[key] = _CONVERT[key](value)
            except (TypeError, ValueError) as exc:
                raise ConfigurationError(f"bad value for {key}: {value!r}") from exc
        else:
            raise ConfigurationError(f"unknown configuration key {key!r}")
    defaults = ExperimentConfig.__dataclass_fields__["scenario"].default_factory()
    kw["scenario"] = {**defaults, **scenario}
    return ExperimentConfig(**kw)


def parse_config(text: str) -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    cp.optionxform = str  # keys are case-sensitive (M vs m)
    try:
        cp.read_string(f"[{_SECTION}]\n" + text)
    except configparser.Error as exc:
        raise ConfigurationError(f"unreadable configuration: {exc}") from exc
    return config_from_mapping(dict(cp[_SECTION]))


def load_config(path: str | Path) -> ExperimentConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigurationError(f"configuration file not found: {p}")
    return parse_config(p.read_text())


def trial_seeds(config: ExperimentConfig) -> list[int]:
    """Seed of each Monte-Carlo trial, drawn from the top-level seed's ``trials`` substream."""
    return [derive_seed(config.seed, "trials", t) for t in range(config.trials)]
