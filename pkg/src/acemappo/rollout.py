"""Episode runner and the per-episode trajectory record used for replay."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .env import BLUE_WIN, DRAW, RED_WIN, CombatEnv, StepResult
from .policies import Policy

RL, EA = "RL", "EA"


@dataclass
class Trajectory:
    """One episode of the blue team, agent-major.

    Rows of each agent are contiguous and the last row of every agent is
    flagged terminal, so GAE can run over the flat arrays with a zero
    bootstrap appended.
    """
    obs: np.ndarray
    states: np.ndarray
    actions: np.ndarray
    logp: np.ndarray
    rewards: np.ndarray
    dones: np.ndarray
    agents: np.ndarray
    source: str = RL
    episode_return: float = 0.0
    outcome: str = DRAW
    steps: int = 0
    cached_gae: tuple | None = field(default=None, repr=False, compare=False)

    def __len__(self) -> int:
        return len(self.actions)

    ARRAYS = ("obs", "states", "actions", "logp", "rewards", "dones", "agents")


@dataclass
class EpisodeResult:
    outcome: str
    steps: int
    team_return: float            # undiscounted sum over blue agents and steps
    discounted_return: float      # sum_t gamma^t sum_i r_t^i for blue
    trajectory: Trajectory | None = None
    wasted_launches: int = 0


def as_seed_sequence(seed) -> np.random.SeedSequence:
    return seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)


def episode_seeds(seed) -> tuple[np.random.SeedSequence, np.random.Generator, np.random.Generator]:
    reset_ss, blue_ss, red_ss = as_seed_sequence(seed).spawn(3)
    return reset_ss, np.random.default_rng(blue_ss), np.random.default_rng(red_ss)


def run_episode(env: CombatEnv, blue: Policy, red: Policy, seed, gamma: float = 0.99,
                record: bool = False, source: str = RL,
                on_step: Callable[[StepResult, dict[int, int]], None] | None = None,
                on_reset=None) -> EpisodeResult:
    """Play one episode. With ``record`` the blue side's transitions are kept
    (the blue policy must then report log-probs)."""
    reset_ss, blue_rng, red_rng = episode_seeds(seed)
    bf, obs = env.reset(reset_ss)
    if on_reset is not None:
        on_reset(bf, obs)
    blue_ids = env.team_agents(0)
    red_ids = env.team_agents(1)
    rows: dict[int, list] = {a: [] for a in blue_ids}
    team_return = 0.0
    disc = 0.0
    discount = 1.0
    result = None
    while True:
        blue_obs = {a: obs[a] for a in blue_ids if a in obs}
        red_obs = {a: obs[a] for a in red_ids if a in obs}
        b_act, b_logp = blue.act(blue_obs, blue_rng)
        r_act, _ = red.act(red_obs, red_rng)
        if record:
            if b_logp is None:
                raise ValueError("recording requires a policy that reports log-probs")
            states = {a: env.global_state(bf, a, obs) for a in blue_obs}
        joint = {**b_act, **r_act}
        result = env.step(bf, joint)
        if on_step is not None:
            on_step(result, joint)
        step_sum = sum(result.rewards[a].total for a in blue_obs)
        team_return += step_sum
        disc += discount * step_sum
        discount *= gamma
        if record:
            for a in blue_obs:
                died = not result.battlefield.aircraft[a].alive
                rows[a].append((blue_obs[a].norm, states[a], b_act[a], b_logp[a],
                                result.rewards[a].total, result.terminal or died))
        bf, obs = result.battlefield, result.observations
        if result.terminal:
            break

    traj = None
    if record:
        flat = [(a, r) for a in blue_ids for r in rows[a]]
        traj = Trajectory(
            obs=np.array([r[0] for _, r in flat]),
            states=np.array([r[1] for _, r in flat]),
            actions=np.array([r[2] for _, r in flat], dtype=np.int64),
            logp=np.array([r[3] for _, r in flat]),
            rewards=np.array([r[4] for _, r in flat]),
            dones=np.array([r[5] for _, r in flat], dtype=bool),
            agents=np.array([a for a, _ in flat], dtype=np.int64),
            source=source, episode_return=team_return, outcome=result.outcome,
            steps=result.battlefield.step_count)
    return EpisodeResult(result.outcome, result.battlefield.step_count, team_return, disc, traj,
                         result.battlefield.wasted_launches)


def score(outcome: str, team: int = 0) -> float:
    """1 for a win of ``team``, 0.5 for a draw, 0 for a loss."""
    if outcome == DRAW:
        return 0.5
    won = BLUE_WIN if team == 0 else RED_WIN
    return 1.0 if outcome == won else 0.0
