"""Head-to-head evaluation and round-robin tournaments."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..checkpoint import CheckpointError, load_actor
from ..config import TrainConfig
from ..curriculum import RuleParams, RulePolicy
from ..env import BLUE_WIN, RED_WIN, CombatEnv
from ..policies import NeuralPolicy, Policy, RandomPolicy
from ..rollout import as_seed_sequence, run_episode

log = logging.getLogger(__name__)


def resolve_policy(ref: str, cfg: TrainConfig | None = None, greedy: bool = False) -> Policy:
    """``rule``, ``random`` or a path to an actor checkpoint."""
    cfg = cfg or TrainConfig()
    if ref == "rule":
        return RulePolicy(RuleParams.from_config(cfg.curriculum))
    if ref == "random":
        return RandomPolicy()
    return NeuralPolicy(load_actor(ref), greedy=greedy, name=Path(ref).stem)


def evaluate_winrate(policy_a: Policy, policy_b: Policy, episodes: int, seed,
                     env: CombatEnv | None = None) -> tuple[int, int, int]:
    """Play ``policy_a`` as blue against ``policy_b``; return (wins_a, wins_b, draws)."""
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    env = env or CombatEnv()
    wins_a = wins_b = draws = 0
    for ss in as_seed_sequence(seed).spawn(episodes):
        outcome = run_episode(env, policy_a, policy_b, ss).outcome
        if outcome == BLUE_WIN:
            wins_a += 1
        elif outcome == RED_WIN:
            wins_b += 1
        else:
            draws += 1
    return wins_a, wins_b, draws


@dataclass
class RoundRobinResult:
    names: list[str]
    win_rate: np.ndarray      # win_rate[a, b]: share of a-vs-b games won by a
    draw_rate: np.ndarray
    episodes_per_pair: int

    def to_csv(self, path) -> Path:
        path = Path(path)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["policy", *self.names])
            for name, row in zip(self.names, self.win_rate):
                w.writerow([name, *(repr(float(x)) for x in row)])
        return path


def round_robin(refs: list[str], episodes_per_pair: int, seed, cfg: TrainConfig | None = None
                ) -> RoundRobinResult:
    """Every pair (and every policy against itself) plays ``episodes_per_pair``
    games, swapping colours each game. Unreadable checkpoints are skipped."""
    cfg = cfg or TrainConfig()
    env = CombatEnv(cfg.env, cfg.airsim)
    names, policies = [], []
    for ref in refs:
        try:
            policies.append(resolve_policy(ref, cfg))
        except CheckpointError as exc:
            log.warning("skipping %s: %s", ref, exc)
            continue
        names.append(ref if ref in ("rule", "random") else Path(ref).stem)
    if len(policies) < 2:
        raise ValueError("round robin needs at least two readable policies")
    n = len(policies)
    wins = np.zeros((n, n))
    draws = np.zeros((n, n))
    for a in range(n):
        for b in range(a, n):
            seeds = np.random.SeedSequence([*np.atleast_1d(seed), a, b]).spawn(episodes_per_pair)
            wa = wb = d = 0
            for k, ss in enumerate(seeds):
                if k % 2 == 0:
                    outcome = run_episode(env, policies[a], policies[b], ss).outcome
                    a_won, b_won = outcome == BLUE_WIN, outcome == RED_WIN
                else:
                    outcome = run_episode(env, policies[b], policies[a], ss).outcome
                    a_won, b_won = outcome == RED_WIN, outcome == BLUE_WIN
                wa += a_won
                wb += b_won
                d += not (a_won or b_won)
            if a == b:
                # self-play: both colours are the same policy; credit each win once
                wins[a, a] = (wa + wb) / (2 * episodes_per_pair)
                draws[a, a] = d / episodes_per_pair
            else:
                wins[a, b] = wa / episodes_per_pair
                wins[b, a] = wb / episodes_per_pair
                draws[a, b] = draws[b, a] = d / episodes_per_pair
    return RoundRobinResult(names, wins, draws, episodes_per_pair)
