"""Advantage estimation, clipped-surrogate actor loss, weighted critic loss,
and the minibatch update that applies them to the shared actor and critic."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import MappoConfig
from .net import (Adam, CriticParams, PolicyParams, clip_grad_norm, entropy_from_logits,
                  log_softmax, mlp_backward, mlp_forward)


class UpdateError(RuntimeError):
    pass


def compute_gae(rewards, values, terminal_flags, gamma: float, lam: float):
    """Return (advantages, returns) for one sequence.

    ``values`` carries one bootstrap entry past the last reward. A terminal
    flag at step t cuts both the bootstrap and the advantage recursion there.
    """
    if not 0.0 <= gamma < 1.0:
        raise ValueError("gamma must be in [0, 1)")
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must be in [0, 1]")
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dones = np.asarray(terminal_flags, dtype=bool)
    T = len(rewards)
    if len(values) != T + 1 or len(dones) != T:
        raise ValueError("need len(values) == len(rewards) + 1 == len(terminal_flags) + 1")
    adv = np.zeros(T)
    running = 0.0
    for t in range(T - 1, -1, -1):
        live = 0.0 if dones[t] else 1.0
        delta = rewards[t] + gamma * values[t + 1] * live - values[t]
        running = delta + gamma * lam * live * running
        adv[t] = running
    return adv, adv + values[:-1]


def td_errors(rewards, values, terminal_flags, gamma: float) -> np.ndarray:
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    live = 1.0 - np.asarray(terminal_flags, dtype=np.float64)
    return rewards + gamma * values[1:] * live - values[:-1]


def critic_loss_and_grad(flat: np.ndarray, sizes, states, returns, weights):
    out, acts = mlp_forward(flat, sizes, states)
    err = out[:, 0] - returns
    B = len(returns)
    loss = float(np.mean(weights * err * err))
    dout = (2.0 * weights * err / B)[:, None]
    return loss, mlp_backward(flat, sizes, acts, dout)


def critic_loss(critic: CriticParams, states, returns, weights=None) -> float:
    """Mean of ``w * (V(s) - R)^2`` over the batch."""
    states = np.atleast_2d(np.asarray(states, dtype=np.float64))
    returns = np.asarray(returns, dtype=np.float64)
    weights = np.ones_like(returns) if weights is None else np.asarray(weights, dtype=np.float64)
    if np.any(weights <= 0):
        raise ValueError("importance weights must be strictly positive")
    out, _ = mlp_forward(critic.flat, critic.sizes, states)
    err = out[:, 0] - returns
    return float(np.mean(weights * err * err))


def _surrogate(logp, old_logp, adv, weights, eps_clip):
    ratio = np.exp(logp - old_logp)
    unclipped = ratio * adv
    clipped = np.clip(ratio, 1.0 - eps_clip, 1.0 + eps_clip) * adv
    use_unclipped = unclipped <= clipped
    obj = np.where(use_unclipped, unclipped, clipped)
    return ratio, obj, use_unclipped


def _check_actor_inputs(old_logp, adv, eps_clip):
    if eps_clip <= 0:
        raise ValueError("eps_clip must be positive")
    if np.any(np.isneginf(old_logp)):
        raise ValueError("old log-probability of -inf")
    if not np.all(np.isfinite(adv)):
        raise ValueError("advantages must be finite")


def actor_loss_and_grad(flat: np.ndarray, sizes, obs, actions, old_logp, adv, weights,
                        eps_clip: float, entropy_coef: float = 0.0):
    """Negated weighted clipped surrogate, minus an optional entropy bonus.

    Returns (loss, grad, info) where info carries the entropy, clip fraction
    and approximate KL of this batch.
    """
    logits, acts = mlp_forward(flat, sizes, obs)
    logp_all = log_softmax(logits)
    B = len(actions)
    rows = np.arange(B)
    logp = logp_all[rows, actions]
    ratio, obj, use_unclipped = _surrogate(logp, old_logp, adv, weights, eps_clip)
    loss = -float(np.mean(weights * obj))
    # d(-mean w*obj)/d logp: only the unclipped branch carries gradient
    dlogp = np.where(use_unclipped, -weights * ratio * adv / B, 0.0)
    p = np.exp(logp_all)
    dlogits = -p * dlogp[:, None]
    dlogits[rows, actions] += dlogp
    H, dH = entropy_from_logits(logits)
    if entropy_coef:
        loss -= entropy_coef * float(H.mean())
        dlogits -= entropy_coef * dH / B
    grad = mlp_backward(flat, sizes, acts, dlogits)
    info = {
        "entropy": float(H.mean()),
        "clip_fraction": float(np.mean(np.abs(ratio - 1.0) > eps_clip)),
        "approx_kl": float(np.mean(old_logp - logp)),
    }
    return loss, grad, info


def actor_loss(policy: PolicyParams, obs, actions, old_logp, advantages, weights=None,
               eps_clip: float = 0.2) -> float:
    """Negative mean of ``w * min(rho*A, clip(rho, 1-eps, 1+eps)*A)``."""
    obs = np.atleast_2d(np.asarray(obs, dtype=np.float64))
    actions = np.asarray(actions, dtype=np.int64)
    old_logp = np.asarray(old_logp, dtype=np.float64)
    adv = np.asarray(advantages, dtype=np.float64)
    weights = np.ones_like(adv) if weights is None else np.asarray(weights, dtype=np.float64)
    _check_actor_inputs(old_logp, adv, eps_clip)
    logits, _ = mlp_forward(policy.flat, policy.sizes, obs)
    logp = log_softmax(logits)[np.arange(len(actions)), actions]
    _, obj, _ = _surrogate(logp, old_logp, adv, weights, eps_clip)
    return -float(np.mean(weights * obj))


@dataclass
class TransitionBatch:
    obs: np.ndarray
    states: np.ndarray
    actions: np.ndarray
    old_logp: np.ndarray
    advantages: np.ndarray
    returns: np.ndarray
    weights: np.ndarray

    def __len__(self) -> int:
        return len(self.actions)

    def take(self, idx) -> "TransitionBatch":
        return TransitionBatch(self.obs[idx], self.states[idx], self.actions[idx],
                               self.old_logp[idx], self.advantages[idx], self.returns[idx],
                               self.weights[idx])


@dataclass
class Optimizers:
    actor: Adam
    critic: Adam

    @classmethod
    def create(cls, policy: PolicyParams, critic: CriticParams, hp: MappoConfig) -> "Optimizers":
        return cls(Adam(len(policy.flat), hp.lr_actor, hp.adam_beta1, hp.adam_beta2, hp.adam_eps),
                   Adam(len(critic.flat), hp.lr_critic, hp.adam_beta1, hp.adam_beta2, hp.adam_eps))


@dataclass
class UpdateMetrics:
    actor_loss: float = 0.0
    critic_loss: float = 0.0
    entropy: float = 0.0
    clip_fraction: float = 0.0
    approx_kl: float = 0.0
    actor_grad_norm: float = 0.0
    critic_grad_norm: float = 0.0
    minibatches: int = 0
    extra: dict = field(default_factory=dict)


def update_step(policy: PolicyParams, critic: CriticParams, batch: TransitionBatch,
                hp: MappoConfig, rng: np.random.Generator, opt: Optimizers | None = None):
    """Run ``hp.epochs`` passes of shuffled minibatch Adam steps.

    Returns (policy', critic', metrics). If any loss goes non-finite the
    optimizer state is rolled back and ``UpdateError`` is raised; the caller
    keeps its original parameters.
    """
    if len(batch) == 0:
        raise UpdateError("empty batch")
    opt = opt or Optimizers.create(policy, critic, hp)
    saved = (opt.actor.state(), opt.critic.state())
    _check_actor_inputs(batch.old_logp, batch.advantages, hp.eps_clip)

    adv = batch.advantages
    if hp.normalize_advantages and len(adv) > 1:
        adv = (adv - adv.mean()) / (adv.std() + 1e-8)
    data = TransitionBatch(batch.obs, batch.states, batch.actions, batch.old_logp, adv,
                           batch.returns / hp.value_scale, batch.weights)

    a_flat, c_flat = policy.flat.copy(), critic.flat.copy()
    sums = UpdateMetrics()
    n = len(data)
    mb = min(hp.minibatch, n)
    try:
        for _ in range(hp.epochs):
            perm = rng.permutation(n)
            for start in range(0, n, mb):
                part = data.take(perm[start:start + mb])
                la, ga, info = actor_loss_and_grad(a_flat, policy.sizes, part.obs, part.actions,
                                                   part.old_logp, part.advantages, part.weights,
                                                   hp.eps_clip, hp.entropy_coef)
                lc, gc = critic_loss_and_grad(c_flat, critic.sizes, part.states, part.returns,
                                              part.weights)
                if not (math.isfinite(la) and math.isfinite(lc)):
                    raise UpdateError(f"non-finite loss (actor={la}, critic={lc})")
                ga, na = clip_grad_norm(ga, hp.max_grad_norm)
                gc, nc = clip_grad_norm(gc, hp.max_grad_norm)
                a_flat = opt.actor.step(a_flat, ga)
                c_flat = opt.critic.step(c_flat, gc)
                sums.actor_loss += la
                sums.critic_loss += lc
                sums.entropy += info["entropy"]
                sums.clip_fraction += info["clip_fraction"]
                sums.approx_kl += info["approx_kl"]
                sums.actor_grad_norm += na
                sums.critic_grad_norm += nc
                sums.minibatches += 1
    except (UpdateError, FloatingPointError) as exc:
        for adam, st in zip((opt.actor, opt.critic), saved):
            adam.m, adam.v, adam.t = st["m"], st["v"], st["t"]
        raise UpdateError(str(exc)) from exc

    k = sums.minibatches
    metrics = UpdateMetrics(sums.actor_loss / k, sums.critic_loss / k, sums.entropy / k,
                            sums.clip_fraction / k, sums.approx_kl / k,
                            sums.actor_grad_norm / k, sums.critic_grad_norm / k, k)
    return policy.with_flat(a_flat), critic.with_flat(c_flat), metrics
