"""Evolutionary side-loop: mutate the shared actor, score the offspring in
full episodes, and blend a sufficiently better elite back into the learner."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .config import EvoConfig
from .env import CombatEnv
from .net import PolicyParams, entropy_ascent_direction
from .policies import NeuralPolicy, Policy
from .rollout import EA, Trajectory, as_seed_sequence, run_episode

log = logging.getLogger(__name__)


@dataclass
class EvaluatedIndividual:
    params: PolicyParams
    fitness: float
    trajectories: list[Trajectory] = field(default_factory=list)


def tau_schedule(progress: float, tau_init: float = 0.5, tau_final: float = 0.1) -> float:
    progress = min(max(progress, 0.0), 1.0)
    return (1.0 - progress) * tau_init + progress * tau_final


def generate_offspring(theta_rl: PolicyParams, obs_batch: np.ndarray, cfg: EvoConfig,
                       rng: np.random.Generator) -> list[PolicyParams]:
    """K children ``theta + noise + eta * normalized entropy gradient``.

    ``theta_rl`` is left untouched. If the entropy direction is not finite the
    children fall back to pure Gaussian mutation.
    """
    if cfg.population < 1:
        raise ValueError("population must be >= 1")
    if cfg.sigma_mut < 0:
        raise ValueError("sigma_mut must be >= 0")
    drift = np.zeros_like(theta_rl.flat)
    if cfg.eta > 0 and len(obs_batch):
        try:
            direction = entropy_ascent_direction(theta_rl, obs_batch, cfg.entropy_eps)
        except (FloatingPointError, ValueError) as exc:
            log.warning("entropy direction unavailable (%s); using Gaussian mutation only", exc)
            direction = None
        if direction is not None and np.all(np.isfinite(direction)):
            drift = cfg.eta * direction
        elif direction is not None:
            log.warning("non-finite entropy direction; using Gaussian mutation only")
    children = []
    for _ in range(cfg.population):
        noise = rng.normal(0.0, cfg.sigma_mut, size=theta_rl.flat.shape) if cfg.sigma_mut > 0 \
            else np.zeros_like(theta_rl.flat)
        children.append(theta_rl.with_flat(theta_rl.flat + noise + drift))
    return children


def discounted_team_return(team_rewards, gamma: float) -> float:
    """sum_t gamma^t * (team reward at t); the per-round fitness term."""
    r = np.asarray(team_rewards, dtype=np.float64)
    return float(np.sum(r * gamma ** np.arange(len(r))))


def evaluate_fitness(params: PolicyParams, opponent: Policy, rounds: int, gamma: float,
                     env: CombatEnv, seed, record: bool = True) -> tuple[float, list[Trajectory]]:
    """Average discounted team return over ``rounds`` episodes vs ``opponent``.

    Failed rounds are dropped (and logged); if all fail the error propagates.
    """
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    policy = NeuralPolicy(params, name="candidate")
    scores, trajs = [], []
    last_exc = None
    for m, ss in enumerate(as_seed_sequence(seed).spawn(rounds)):
        try:
            res = run_episode(env, policy, opponent, ss, gamma=gamma, record=record, source=EA)
        except Exception as exc:  # noqa: BLE001 - a broken round must not sink the phase
            log.warning("fitness round %d failed: %s", m, exc)
            last_exc = exc
            continue
        scores.append(res.discounted_return)
        if res.trajectory is not None:
            trajs.append(res.trajectory)
    if not scores:
        raise RuntimeError("every fitness round failed") from last_exc
    return float(np.mean(scores)), trajs


def soft_update(theta_rl: PolicyParams, theta_elite: PolicyParams, tau: float) -> PolicyParams:
    return theta_rl.with_flat((1.0 - tau) * theta_rl.flat + tau * theta_elite.flat)


def select_and_inject(theta_rl: PolicyParams, population: list[EvaluatedIndividual], f_rl: float,
                      cfg: EvoConfig, progress: float):
    """Pick the elite (first on ties) and soft-update the learner only when the
    elite beats it by more than the margin.

    Returns (theta', injected, elite_trajectories, elite_index, tau).
    """
    if not population:
        raise ValueError("population is empty")
    fits = [ind.fitness for ind in population]
    j = int(np.argmax(fits))
    elite = population[j]
    tau = tau_schedule(progress, cfg.tau_init, cfg.tau_final)
    if elite.fitness > f_rl + cfg.margin:
        return soft_update(theta_rl, elite.params, tau), True, elite.trajectories, j, tau
    return theta_rl, False, elite.trajectories, j, tau
