"""Opponent pool with difficulty-matched sampling, plus the scripted baseline.

Each pool entry carries a difficulty in [0, 1]: its score against the base
policy (draws count half). Opponents are drawn from a Gaussian over
difficulty centred on the current curriculum level, and the level creeps up
whenever the learner beats the base policy often enough.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .airsim import Action
from .config import CurriculumConfig
from .env import B_M, D_E, D_M, DH_E, NM, THETA_E, CombatEnv, Observation
from .net import PolicyParams
from .policies import NeuralPolicy, Policy, RandomPolicy
from .rollout import as_seed_sequence, run_episode, score


@dataclass(frozen=True)
class RuleParams:
    fire_range: float = 20_000.0
    evade_range: float = 15_000.0
    aim_tolerance: float = math.radians(10.0)
    altitude_band: float = 1000.0

    @classmethod
    def from_config(cls, cfg: CurriculumConfig) -> "RuleParams":
        return cls(cfg.fire_range, cfg.evade_range, math.radians(cfg.aim_tolerance_deg),
                   cfg.altitude_band)


def rule_policy_action(obs: Observation | np.ndarray, params: RuleParams = RuleParams()) -> int:
    """Evade a close missile, shoot when aligned and in range, otherwise
    point at the nearest enemy and manage altitude and closure."""
    raw = obs.raw if isinstance(obs, Observation) else np.asarray(obs)
    if raw[B_M] == 1 and raw[D_M] < params.evade_range:
        return int(Action.NOTCH)
    bearing = raw[THETA_E]
    aligned = abs(bearing) < params.aim_tolerance
    if aligned and raw[D_E] < params.fire_range and raw[NM] > 0:
        return int(Action.FIRE)
    if not aligned:
        return int(Action.TURN_LEFT if bearing < 0 else Action.TURN_RIGHT)
    if raw[DH_E] < -params.altitude_band:
        return int(Action.CLIMB)
    if raw[DH_E] > params.altitude_band:
        return int(Action.DIVE)
    if raw[D_E] > params.fire_range:
        return int(Action.ACCELERATE)
    if raw[NM] == 0:
        return int(Action.DECELERATE)
    return int(Action.STRAIGHT)


class RulePolicy(Policy):
    name = "rule"

    def __init__(self, params: RuleParams = RuleParams()):
        self.params = params

    def act(self, observations, rng):
        return {a: rule_policy_action(o, self.params) for a, o in observations.items()}, None


def base_policy(cfg: CurriculumConfig) -> Policy:
    return RulePolicy(RuleParams.from_config(cfg)) if cfg.base_opponent == "rule" else RandomPolicy()


@dataclass
class OpponentEntry:
    uid: int
    policy: Policy
    difficulty: float
    admitted: int = 0
    is_base: bool = False
    checkpoint: str = ""

    @property
    def params(self) -> PolicyParams | None:
        return self.policy.params if isinstance(self.policy, NeuralPolicy) else None


@dataclass(frozen=True)
class CurriculumState:
    mu: float = 0.3
    stage: int = 0
    sigma_c: float = 0.15
    delta: float = 0.01
    zeta: float = 0.5
    mu_max: float = 0.8
    pool_capacity: int = 50

    @classmethod
    def from_config(cls, cfg: CurriculumConfig) -> "CurriculumState":
        return cls(cfg.mu_init, 0, cfg.sigma_c, cfg.delta, cfg.zeta, cfg.mu_max, cfg.pool_capacity)


def sampling_probabilities(pool: list[OpponentEntry], state: CurriculumState) -> np.ndarray:
    d = np.array([e.difficulty for e in pool], dtype=np.float64)
    inside = (d >= 0.0) & (d <= 1.0)
    w = np.where(inside, np.exp(-(d - state.mu) ** 2 / (2.0 * state.sigma_c ** 2)), 0.0)
    total = w.sum()
    if total <= 0.0:
        return np.full(len(pool), 1.0 / len(pool))
    return w / total


def sample_opponent(pool: list[OpponentEntry], state: CurriculumState,
                    rng: np.random.Generator) -> OpponentEntry:
    if not pool:
        raise ValueError("opponent pool is empty")
    p = sampling_probabilities(pool, state)
    return pool[int(rng.choice(len(pool), p=p))]


def update_center(state: CurriculumState, winrate: float) -> CurriculumState:
    """Advance the centre by delta when ``winrate`` beats the threshold, capped
    at mu_max. The stage counts actual moves of the centre."""
    if not 0.0 <= winrate <= 1.0:
        raise ValueError("winrate must be in [0, 1]")
    mu = min(state.mu_max, state.mu + state.delta * (1.0 if winrate > state.zeta else 0.0))
    stage = state.stage + 1 if mu != state.mu else state.stage
    return replace(state, mu=mu, stage=stage)


def admit_and_prune(pool: list[OpponentEntry], candidate: PolicyParams | None, winrate: float,
                    state: CurriculumState, episode: int = 0, uid: int | None = None
                    ) -> tuple[list[OpponentEntry], list[OpponentEntry]]:
    """Admit a frozen copy of ``candidate`` if it beat the threshold, then trim
    the entries farthest from the centre. Returns (pool', removed)."""
    if not 0.0 <= winrate <= 1.0:
        raise ValueError("winrate must be in [0, 1]")
    pool = list(pool)
    if candidate is not None and winrate > state.zeta:
        frozen = PolicyParams(candidate.flat.copy(), candidate.sizes)
        new_uid = uid if uid is not None else max((e.uid for e in pool), default=-1) + 1
        pool.append(OpponentEntry(new_uid, NeuralPolicy(frozen, name=f"pool{new_uid}"),
                                  float(winrate), episode))
    removed = []
    while len(pool) > state.pool_capacity:
        candidates = [i for i, e in enumerate(pool) if not e.is_base]
        if not candidates:
            break
        worst = max(candidates, key=lambda i: (abs(pool[i].difficulty - state.mu), -pool[i].admitted))
        removed.append(pool.pop(worst))
    return pool, removed


def opponent_difficulty(policy: Policy, episodes: int, seed, env: CombatEnv,
                        reference: Policy | None = None) -> float:
    """Score of ``policy`` (blue) against the reference (default: rule policy)."""
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    reference = reference or RulePolicy()
    seeds = as_seed_sequence(seed).spawn(episodes)
    total = sum(score(run_episode(env, policy, reference, s).outcome) for s in seeds)
    return total / episodes


def initial_pool(cfg: CurriculumConfig) -> list[OpponentEntry]:
    # the base policy measured against itself scores 0.5 by symmetry
    return [OpponentEntry(0, base_policy(cfg), 0.5, 0, is_base=True)]
