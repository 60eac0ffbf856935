"""Team policies. A policy maps the observations of its living agents to one
action index each; the same object drives every agent of a team."""

from __future__ import annotations

import numpy as np

from .airsim import N_ACTIONS
from .env import Observation
from .net import PolicyParams, log_softmax, policy_logits


class Policy:
    name = "policy"

    def act(self, observations: dict[int, Observation], rng: np.random.Generator
            ) -> tuple[dict[int, int], dict[int, float] | None]:
        """Return actions and, for stochastic learners, behaviour log-probs."""
        raise NotImplementedError


class RandomPolicy(Policy):
    name = "random"

    def act(self, observations, rng):
        agents = sorted(observations)
        draws = rng.integers(0, N_ACTIONS, size=len(agents))
        return {a: int(d) for a, d in zip(agents, draws)}, None


class ConstantPolicy(Policy):
    """Always issues the same command; handy as a scripted baseline."""

    def __init__(self, action: int):
        self.action = int(action)
        self.name = f"constant{self.action}"

    def act(self, observations, rng):
        return {a: self.action for a in observations}, None


class NeuralPolicy(Policy):
    """Shared categorical actor: one parameter vector for every agent."""

    def __init__(self, params: PolicyParams, greedy: bool = False, name: str = "neural"):
        self.params = params
        self.greedy = greedy
        self.name = name

    def act(self, observations, rng):
        agents = sorted(observations)
        if not agents:
            return {}, {}
        X = np.stack([observations[a].norm for a in agents])
        logits, _ = policy_logits(self.params, X)
        logp = log_softmax(logits)
        if self.greedy:
            choice = logp.argmax(axis=1)
        else:
            cdf = np.cumsum(np.exp(logp), axis=1)
            u = rng.random(len(agents))[:, None] * cdf[:, -1:]
            choice = np.minimum((cdf < u).sum(axis=1), N_ACTIONS - 1)
        rows = np.arange(len(agents))
        return ({a: int(c) for a, c in zip(agents, choice)},
                {a: float(lp) for a, lp in zip(agents, logp[rows, choice])})
