"""The training loop: curriculum-sampled opponents, periodic evolution phases,
prioritized replay and MAPPO updates, with CSV/JSONL logging and checkpoints."""

from __future__ import annotations

import csv
import json
import logging
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import curriculum as cur
from ..checkpoint import save_envelope, save_params
from ..config import TrainConfig, dump_config
from ..env import CombatEnv
from ..evo import EvaluatedIndividual, evaluate_fitness, generate_offspring, select_and_inject
from ..mappo import Optimizers, TransitionBatch, compute_gae, td_errors, update_step
from ..net import CriticParams, PolicyParams, init_critic, init_policy, value_forward
from ..policies import NeuralPolicy
from ..replay import (PriorityWeights, ReplayBuffer, anneal_beta, compute_priority,
                      importance_weights)
from ..rollout import RL, Trajectory, run_episode, score

log = logging.getLogger(__name__)

# stream tags for derived seeds
_EPISODE, _EVO, _FIT_RL, _WINRATE = 1, 2, 3, 4

METRIC_FIELDS = [
    "episode", "opponent", "opponent_difficulty", "outcome", "win", "score", "team_return",
    "steps", "rolling_win_rate", "rolling_reward", "updated", "actor_loss", "critic_loss",
    "entropy", "clip_fraction", "approx_kl", "beta", "mean_is_weight", "replay_size", "mu",
    "stage", "pool_size", "evo_phase", "injected", "elite_fitness", "rl_fitness", "tau",
    "winrate_vs_base",
]


class TrainingAborted(RuntimeError):
    def __init__(self, episode: int, cause: BaseException):
        super().__init__(f"training aborted at episode {episode}: {cause}")
        self.episode = episode


@dataclass
class TrainResult:
    policy: PolicyParams
    critic: CriticParams
    metrics: list[dict]
    events: list[dict]
    evolution_phases: int
    injections: int
    out_dir: Path | None = None
    opponents_seen: list[str] = field(default_factory=list)
    update_weights: list[np.ndarray] = field(default_factory=list)


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


class Trainer:
    def __init__(self, cfg: TrainConfig, out_dir: str | Path | None = None,
                 keep_update_weights: bool = False):
        cfg.validate()
        self.cfg = cfg
        self.env = CombatEnv(cfg.env, cfg.airsim)
        root = np.random.SeedSequence(cfg.seed)
        init_ss, opp_ss, upd_ss, evo_ss = root.spawn(4)
        init_rng = np.random.default_rng(init_ss)
        self.opp_rng = np.random.default_rng(opp_ss)
        self.upd_rng = np.random.default_rng(upd_ss)
        self.evo_rng = np.random.default_rng(evo_ss)
        self.policy = init_policy(init_rng, cfg.net.actor_hidden, cfg.net.final_policy_scale)
        self.critic = init_critic(init_rng, self.env.state_dim, cfg.net.critic_hidden)
        self.opt = Optimizers.create(self.policy, self.critic, cfg.mappo)
        self.buffer = ReplayBuffer(cfg.replay.capacity, cfg.replay.kappa)
        self.alphas = PriorityWeights.from_config(cfg.replay)
        self.base = cur.base_policy(cfg.curriculum)
        self.pool = cur.initial_pool(cfg.curriculum)
        self.pool[0].policy = self.base
        self.cstate = cur.CurriculumState.from_config(cfg.curriculum)
        self.metrics: list[dict] = []
        self.events: list[dict] = []
        self.evolution_phases = 0
        self.injections = 0
        self.opponents_seen: list[str] = []
        self.keep_update_weights = keep_update_weights
        self.update_weights: list[np.ndarray] = []
        self.out_dir = Path(out_dir) if out_dir is not None else None
        self._wins: deque = deque(maxlen=100)
        self._returns: deque = deque(maxlen=100)
        if self.out_dir is not None:
            (self.out_dir / "checkpoints").mkdir(parents=True, exist_ok=True)
            (self.out_dir / "pool").mkdir(exist_ok=True)
            dump_config(cfg, self.out_dir / "config.yaml")
            self._metrics_fh = open(self.out_dir / "metrics.csv", "w", newline="")
            self._metrics_csv = csv.DictWriter(self._metrics_fh, fieldnames=METRIC_FIELDS)
            self._metrics_csv.writeheader()
            self._events_fh = open(self.out_dir / "events.jsonl", "w")

    # ------------------------------------------------------------------ io
    def _event(self, kind: str, episode: int, **data) -> None:
        row = {"event": kind, "episode": episode, **data}
        self.events.append(row)
        if self.out_dir is not None:
            self._events_fh.write(json.dumps(row, sort_keys=True) + "\n")

    def _log_row(self, row: dict) -> None:
        self.metrics.append(row)
        if self.out_dir is not None:
            self._metrics_csv.writerow({k: _fmt(row.get(k, "")) for k in METRIC_FIELDS})

    def checkpoint(self, tag: str) -> None:
        if self.out_dir is None:
            return
        ck = self.out_dir / "checkpoints"
        save_params(ck / f"actor_{tag}.npz", self.policy, tag=tag)
        save_params(ck / f"critic_{tag}.npz", self.critic, tag=tag)

    def write_pool_manifest(self) -> None:
        if self.out_dir is None:
            return
        with open(self.out_dir / "pool.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["uid", "difficulty", "admitted", "checkpoint"])
            for e in self.pool:
                w.writerow([e.uid, repr(e.difficulty), e.admitted,
                            e.checkpoint or f"base:{self.cfg.curriculum.base_opponent}"])

    def close(self) -> None:
        if self.out_dir is not None:
            self._metrics_fh.close()
            self._events_fh.close()

    # ------------------------------------------------------------ helpers
    def _seed(self, *key: int) -> np.random.SeedSequence:
        return np.random.SeedSequence([self.cfg.seed, *key])

    def _advantages(self, traj: Trajectory) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        m = self.cfg.mappo
        values = np.append(value_forward(self.critic, traj.states) * m.value_scale, 0.0)
        adv, ret = compute_gae(traj.rewards, values, traj.dones, m.gamma, m.lam)
        deltas = td_errors(traj.rewards, values, traj.dones, m.gamma)
        return adv, ret, deltas

    def _store(self, traj: Trajectory) -> float:
        adv, ret, deltas = self._advantages(traj)
        traj.cached_gae = (adv, ret)
        priority = compute_priority(traj, deltas, self.buffer.stats, self.alphas)
        self.buffer.insert(traj, priority)
        return priority

    def _opponent(self) -> cur.OpponentEntry:
        if self.cfg.disable_curriculum:
            return self.pool[0]
        return cur.sample_opponent(self.pool, self.cstate, self.opp_rng)

    # ------------------------------------------------------------ phases
    def evolution_phase(self, episode: int, opponent: cur.OpponentEntry, fresh: list[Trajectory]):
        """Offspring -> fitness -> elite -> conditional injection, then the
        base-policy evaluation that drives pool admission and the curriculum."""
        cfg = self.cfg
        phase = self.evolution_phases
        self.evolution_phases += 1
        info = {"evo_phase": 1}
        elite_trajs: list[Trajectory] = []
        if not cfg.disable_g_update:
            obs = self.buffer.recent_observations(cfg.evo.entropy_batch)
            if len(obs) == 0 and fresh:
                obs = np.concatenate([t.obs for t in fresh])[-cfg.evo.entropy_batch:]
            children = generate_offspring(self.policy, obs, cfg.evo, self.evo_rng)
            population = []
            for j, child in enumerate(children):
                f, trajs = evaluate_fitness(child, opponent.policy, cfg.evo.eval_rounds,
                                            cfg.mappo.gamma, self.env, self._seed(_EVO, phase, j))
                population.append(EvaluatedIndividual(child, f, trajs))
            f_rl, _ = evaluate_fitness(self.policy, opponent.policy, cfg.evo.eval_rounds,
                                       cfg.mappo.gamma, self.env, self._seed(_FIT_RL, phase),
                                       record=False)
            progress = episode / max(cfg.total_episodes, 1)
            self.policy, injected, elite_trajs, j, tau = select_and_inject(
                self.policy, population, f_rl, cfg.evo, progress)
            elite_f = population[j].fitness
            self.injections += int(injected)
            info.update(injected=int(injected), elite_fitness=elite_f, rl_fitness=f_rl, tau=tau)
            self._event("evolution", episode, phase=phase, elite=j, elite_fitness=elite_f,
                        rl_fitness=f_rl, injected=bool(injected), tau=tau,
                        fitness=[ind.fitness for ind in population])

        w = cur.opponent_difficulty(NeuralPolicy(self.policy), cfg.curriculum.winrate_episodes,
                                    self._seed(_WINRATE, phase), self.env, self.base)
        info["winrate_vs_base"] = w
        before = len(self.pool)
        next_uid = max(e.uid for e in self.pool) + 1
        self.cstate = cur.update_center(self.cstate, w)
        self.pool, removed = cur.admit_and_prune(self.pool, self.policy, w, self.cstate,
                                                 episode, uid=next_uid)
        if len(self.pool) + len(removed) > before:
            entry = next(e for e in self.pool + removed if e.uid == next_uid)
            if self.out_dir is not None:
                path = self.out_dir / "pool" / f"opp_{next_uid:04d}.npz"
                save_params(path, entry.params, difficulty=w, episode=episode)
                entry.checkpoint = str(path.relative_to(self.out_dir))
                self.checkpoint(f"admit{next_uid:04d}")
            self._event("admission", episode, uid=next_uid, difficulty=w, mu=self.cstate.mu,
                        stage=self.cstate.stage)
        for e in removed:
            self._event("prune", episode, uid=e.uid, difficulty=e.difficulty)
        self.write_pool_manifest()
        return info, elite_trajs

    def build_batch(self, fresh: list[Trajectory], episode: int):
        cfg = self.cfg
        trajs = list(fresh)
        weights = [1.0] * len(fresh)
        frac = cfg.replay.replay_fraction
        n_replay = int(round(len(fresh) * frac / (1.0 - frac))) if frac > 0 else 0
        beta = anneal_beta(episode, cfg.total_episodes, cfg.replay.beta_start, cfg.replay.beta_end)
        if n_replay and len(self.buffer):
            if cfg.disable_ptr:
                sampled, _, _ = self.buffer.sample_batch(n_replay, self.upd_rng, kappa=0.0)
                w = np.ones(n_replay)
            else:
                sampled, _, q = self.buffer.sample_batch(n_replay, self.upd_rng)
                w = importance_weights(len(self.buffer), q, beta)
            trajs += sampled
            weights += list(w)
        parts = {k: [] for k in ("obs", "states", "actions", "logp", "adv", "ret", "w")}
        for t, wt in zip(trajs, weights):
            if cfg.mappo.recompute_gae or getattr(t, "cached_gae", None) is None:
                adv, ret, _ = self._advantages(t)
            else:
                adv, ret = t.cached_gae
            parts["obs"].append(t.obs)
            parts["states"].append(t.states)
            parts["actions"].append(t.actions)
            parts["logp"].append(t.logp)
            parts["adv"].append(adv)
            parts["ret"].append(ret)
            parts["w"].append(np.full(len(t), wt))
        batch = TransitionBatch(*(np.concatenate(parts[k]) for k in
                                  ("obs", "states", "actions", "logp", "adv", "ret", "w")))
        return batch, beta

    # ------------------------------------------------------------ main loop
    def run(self) -> TrainResult:
        cfg = self.cfg
        self.checkpoint("ep0000")
        self.write_pool_manifest()
        pending: list[Trajectory] = []
        episode = 0
        try:
            for episode in range(1, cfg.total_episodes + 1):
                self._train_episode(episode, pending)
        except Exception as exc:
            self.checkpoint(f"abort{episode:04d}")
            self._event("abort", episode, error=str(exc))
            self.close()
            raise TrainingAborted(episode, exc) from exc
        self.checkpoint("final")
        if self.out_dir is not None:
            save_params(self.out_dir / "actor.npz", self.policy)
            save_params(self.out_dir / "critic.npz", self.critic)
            meta, arrays = self.buffer.to_arrays()
            save_envelope(self.out_dir / "replay.npz", "replay", meta, arrays)
        self.close()
        return TrainResult(self.policy, self.critic, self.metrics, self.events,
                           self.evolution_phases, self.injections, self.out_dir,
                           self.opponents_seen, self.update_weights)

    def _train_episode(self, episode: int, pending: list[Trajectory]) -> None:
        cfg = self.cfg
        opponent = self._opponent()
        self.opponents_seen.append(opponent.policy.name)
        res = run_episode(self.env, NeuralPolicy(self.policy), opponent.policy,
                          self._seed(_EPISODE, episode), cfg.mappo.gamma, record=True, source=RL)
        pending.append(res.trajectory)
        win = 1.0 if res.outcome == "blue_win" else 0.0
        self._wins.append(win)
        self._returns.append(res.team_return)
        row = {"episode": episode, "opponent": opponent.uid,
               "opponent_difficulty": opponent.difficulty, "outcome": res.outcome, "win": int(win),
               "score": score(res.outcome), "team_return": res.team_return, "steps": res.steps,
               "rolling_win_rate": float(np.mean(self._wins)),
               "rolling_reward": float(np.mean(self._returns)), "evo_phase": 0, "injected": 0}

        elite: list[Trajectory] = []
        if episode % cfg.evo.period == 0:
            info, elite = self.evolution_phase(episode, opponent, pending)
            row.update(info)

        if episode % cfg.rollout_episodes == 0 or episode == cfg.total_episodes:
            for t in pending:
                self._store(t)
            for t in elite:
                self._store(t)
            batch, beta = self.build_batch(pending, episode)
            if self.keep_update_weights:
                self.update_weights.append(batch.weights.copy())
            self.policy, self.critic, m = update_step(self.policy, self.critic, batch, cfg.mappo,
                                                      self.upd_rng, self.opt)
            pending.clear()
            row.update(updated=1, actor_loss=m.actor_loss, critic_loss=m.critic_loss,
                       entropy=m.entropy, clip_fraction=m.clip_fraction, approx_kl=m.approx_kl,
                       beta=beta, mean_is_weight=float(batch.weights.mean()))
        else:
            for t in elite:
                self._store(t)
            row["updated"] = 0
        row.update(replay_size=len(self.buffer), mu=self.cstate.mu, stage=self.cstate.stage,
                   pool_size=len(self.pool))
        self._log_row(row)
        if episode % cfg.checkpoint_every == 0:
            self.checkpoint(f"ep{episode:04d}")


def train(cfg: TrainConfig, out_dir: str | Path | None = None, **kwargs) -> TrainResult:
    trainer = Trainer(cfg, out_dir, **kwargs)
    result = trainer.run()
    if out_dir is not None:
        from .plotting import training_figures
        training_figures(result.metrics, Path(out_dir))
    return result
