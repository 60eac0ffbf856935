"""Configuration records for every subsystem, with YAML load/dump.

Every physical constant and hyperparameter lives here. A config file only
needs to list the values it overrides; missing keys keep their defaults.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml


class ConfigError(ValueError):
    pass


@dataclass
class AirsimConfig:
    extent_ns: float = 200_000.0
    extent_ew: float = 100_000.0
    alt_min: float = 100.0
    alt_max: float = 20_000.0
    v_min: float = 100.0
    v_max: float = 400.0
    turn_rate_deg: float = 10.0
    turn_large: bool = False
    climb_rate: float = 50.0
    pitch_rate_deg: float = 5.0
    accel: float = 10.0
    missile_speed: float = 1000.0
    missile_lifetime: float = 60.0
    missile_turn_rate_deg: float = 20.0
    kill_radius: float = 300.0
    missiles_per_aircraft: int = 4

    @property
    def turn_magnitude(self) -> float:
        return math.radians(60.0 if self.turn_large else 30.0)

    def validate(self) -> None:
        if self.extent_ns <= 0 or self.extent_ew <= 0:
            raise ConfigError("battlefield extents must be positive")
        if not 0 < self.v_min < self.v_max:
            raise ConfigError("need 0 < v_min < v_max")
        if not self.alt_min < self.alt_max:
            raise ConfigError("need alt_min < alt_max")
        if not 0 <= self.missiles_per_aircraft <= 4:
            raise ConfigError("missiles_per_aircraft must be in [0, 4]")
        for name in ("turn_rate_deg", "climb_rate", "pitch_rate_deg", "accel",
                     "missile_speed", "missile_lifetime", "missile_turn_rate_deg",
                     "kill_radius"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")


@dataclass
class EnvConfig:
    team_size: int = 2
    dt: float = 1.0
    max_steps: int = 900
    init_altitude: float = 3000.0
    init_speed: float = 180.0
    spawn_margin: float = 10_000.0  # distance of each team from its own boundary
    lateral_jitter: float = 10_000.0
    wingman_spacing: float = 5_000.0
    w1: float = 0.3
    w2: float = 0.4
    w3: float = 0.3
    d_max: float = 100_000.0
    d_safe: float = 20_000.0
    win_reward: float = 1000.0

    def validate(self) -> None:
        if self.team_size not in (1, 2):
            raise ConfigError("team_size must be 1 or 2")
        if self.dt <= 0 or self.max_steps < 1:
            raise ConfigError("dt and max_steps must be positive")
        if min(self.w1, self.w2, self.w3) <= 0:
            raise ConfigError("reward weights must be positive")
        if self.d_max <= 0 or self.d_safe <= 0:
            raise ConfigError("d_max and d_safe must be positive")


@dataclass
class NetConfig:
    actor_hidden: list[int] = field(default_factory=lambda: [64, 64])
    critic_hidden: list[int] = field(default_factory=lambda: [128, 128])
    final_policy_scale: float = 0.01

    def validate(self) -> None:
        if not self.actor_hidden or not self.critic_hidden:
            raise ConfigError("networks need at least one hidden layer")


@dataclass
class MappoConfig:
    gamma: float = 0.99
    lam: float = 0.95
    eps_clip: float = 0.2
    epochs: int = 4
    minibatch: int = 256
    lr_actor: float = 3e-4
    lr_critic: float = 3e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    max_grad_norm: float = 0.5
    entropy_coef: float = 0.01
    normalize_advantages: bool = True
    recompute_gae: bool = True
    value_scale: float = 1.0  # critic outputs are in units of this many reward points

    def validate(self) -> None:
        if self.value_scale <= 0:
            raise ConfigError("value_scale must be positive")
        if not 0 <= self.gamma < 1:
            raise ConfigError("gamma must be in [0, 1)")
        if not 0 <= self.lam <= 1:
            raise ConfigError("lam must be in [0, 1]")
        if self.eps_clip <= 0 or self.epochs < 1 or self.minibatch < 1:
            raise ConfigError("eps_clip, epochs and minibatch must be positive")


@dataclass
class ReplayConfig:
    capacity: int = 512
    kappa: float = 0.6
    beta_start: float = 0.4
    beta_end: float = 1.0
    alpha1: float = 0.5
    alpha2: float = 0.3
    alpha3: float = 0.2
    priority_floor: float = 1e-3
    replay_fraction: float = 0.5

    def validate(self) -> None:
        if self.capacity < 1:
            raise ConfigError("capacity must be >= 1")
        if not 0 <= self.kappa <= 1:
            raise ConfigError("kappa must be in [0, 1]")
        if not 0 <= self.replay_fraction < 1:
            raise ConfigError("replay_fraction must be in [0, 1)")
        if self.priority_floor <= 0:
            raise ConfigError("priority_floor must be positive")


@dataclass
class EvoConfig:
    population: int = 5
    period: int = 20
    eval_rounds: int = 10
    margin: float = 5.0
    sigma_mut: float = 0.02
    eta: float = 0.05
    entropy_eps: float = 1e-8
    entropy_batch: int = 256
    tau_init: float = 0.5
    tau_final: float = 0.1

    def validate(self) -> None:
        if self.population < 1 or self.eval_rounds < 1 or self.period < 1:
            raise ConfigError("population, eval_rounds and period must be >= 1")
        if self.margin < 0:
            raise ConfigError("margin must be >= 0")
        if self.sigma_mut < 0 or self.eta < 0 or self.entropy_eps <= 0:
            raise ConfigError("sigma_mut, eta >= 0 and entropy_eps > 0 required")
        for t in (self.tau_init, self.tau_final):
            if not 0 < t <= 1:
                raise ConfigError("tau endpoints must be in (0, 1]")


@dataclass
class CurriculumConfig:
    mu_init: float = 0.3
    sigma_c: float = 0.15
    delta: float = 0.01
    zeta: float = 0.5
    mu_max: float = 0.8
    pool_capacity: int = 50
    winrate_episodes: int = 20
    base_opponent: str = "rule"  # "rule" or "random"
    fire_range: float = 20_000.0
    evade_range: float = 15_000.0
    aim_tolerance_deg: float = 10.0
    altitude_band: float = 1000.0

    def validate(self) -> None:
        if not 0 <= self.mu_init <= self.mu_max <= 1:
            raise ConfigError("need 0 <= mu_init <= mu_max <= 1")
        if self.sigma_c <= 0 or self.pool_capacity < 1 or self.winrate_episodes < 1:
            raise ConfigError("sigma_c, pool_capacity, winrate_episodes must be positive")
        if self.base_opponent not in ("rule", "random"):
            raise ConfigError("base_opponent must be 'rule' or 'random'")


ABLATIONS = ("g_update", "ptr", "curriculum")


@dataclass
class TrainConfig:
    airsim: AirsimConfig = field(default_factory=AirsimConfig)
    env: EnvConfig = field(default_factory=EnvConfig)
    net: NetConfig = field(default_factory=NetConfig)
    mappo: MappoConfig = field(default_factory=MappoConfig)
    replay: ReplayConfig = field(default_factory=ReplayConfig)
    evo: EvoConfig = field(default_factory=EvoConfig)
    curriculum: CurriculumConfig = field(default_factory=CurriculumConfig)
    total_episodes: int = 2500
    rollout_episodes: int = 1
    seed: int = 0
    checkpoint_every: int = 100
    disable_g_update: bool = False
    disable_ptr: bool = False
    disable_curriculum: bool = False

    def validate(self) -> None:
        for sub in (self.airsim, self.env, self.net, self.mappo, self.replay,
                    self.evo, self.curriculum):
            sub.validate()
        if self.total_episodes < 0 or self.rollout_episodes < 1:
            raise ConfigError("total_episodes >= 0 and rollout_episodes >= 1 required")
        if self.checkpoint_every < 1:
            raise ConfigError("checkpoint_every must be >= 1")

    def ablate(self, name: str) -> None:
        if name not in ABLATIONS:
            raise ConfigError(f"unknown ablation {name!r}; choose from {ABLATIONS}")
        setattr(self, f"disable_{name}", True)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


_SECTIONS = {
    "airsim": AirsimConfig,
    "env": EnvConfig,
    "net": NetConfig,
    "mappo": MappoConfig,
    "replay": ReplayConfig,
    "evo": EvoConfig,
    "curriculum": CurriculumConfig,
}


def _build(cls, values: dict[str, Any], where: str):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(values) - names
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    return cls(**values)


def config_from_dict(data: dict[str, Any] | None) -> TrainConfig:
    data = dict(data or {})
    kwargs: dict[str, Any] = {}
    for key, cls in _SECTIONS.items():
        section = data.pop(key, None) or {}
        if not isinstance(section, dict):
            raise ConfigError(f"section {key!r} must be a mapping")
        kwargs[key] = _build(cls, section, key)
    cfg = _build(TrainConfig, {**data, **kwargs}, "top level")
    cfg.validate()
    return cfg


def load_config(path: str | Path) -> TrainConfig:
    with open(path) as fh:
        data = yaml.safe_load(fh)
    return config_from_dict(data)


def dump_config(cfg: TrainConfig, path: str | Path) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(cfg.to_dict(), fh, sort_keys=False)


def smoke_config(seed: int = 0, episodes: int = 300) -> TrainConfig:
    """Desk-scale 1v1 run against a uniformly random opponent on a 50 km square."""
    cfg = TrainConfig(seed=seed, total_episodes=episodes, rollout_episodes=2)
    cfg.env.team_size = 1
    cfg.airsim.extent_ns = cfg.airsim.extent_ew = 50_000.0
    cfg.mappo.lr_actor = cfg.mappo.lr_critic = 1e-3
    cfg.mappo.value_scale = 100.0
    cfg.curriculum.base_opponent = "random"
    # the base entry is never pruned, so a capacity of one keeps the random
    # policy as the only training opponent while admission still runs
    cfg.curriculum.pool_capacity = 1
    cfg.validate()
    return cfg
