"""Prioritized trajectory replay.

Whole blue-team trajectories are stored with a scalar priority mixing mean
absolute TD error, the return's z-score against the buffer's running
statistics, and a bonus for trajectories produced by evolved policies.
Sampling is with replacement from ``P**kappa``; importance weights correct the
resulting bias.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import ReplayConfig
from .rollout import EA, Trajectory


@dataclass
class ReturnStats:
    """Welford running mean and sample variance of inserted episode returns."""
    count: int = 0
    mean: float = 0.0
    m2: float = 0.0

    def push(self, x: float) -> None:
        self.count += 1
        d = x - self.mean
        self.mean += d / self.count
        self.m2 += d * (x - self.mean)

    @property
    def std(self) -> float:
        if self.count < 2:
            return 0.0
        return math.sqrt(self.m2 / (self.count - 1))

    def zscore(self, x: float) -> float:
        s = self.std
        if self.count < 2 or s == 0.0:
            return 0.0
        return (x - self.mean) / s


@dataclass(frozen=True)
class PriorityWeights:
    alpha1: float = 0.5
    alpha2: float = 0.3
    alpha3: float = 0.2
    floor: float = 1e-3

    @classmethod
    def from_config(cls, cfg: ReplayConfig) -> "PriorityWeights":
        return cls(cfg.alpha1, cfg.alpha2, cfg.alpha3, cfg.priority_floor)


def compute_priority(trajectory: Trajectory, gae_deltas, stats: ReturnStats,
                     alphas: PriorityWeights = PriorityWeights()) -> float:
    deltas = np.asarray(gae_deltas, dtype=np.float64)
    if len(deltas) == 0:
        raise ValueError("trajectory is empty")
    learning = float(np.mean(np.abs(deltas)))
    quality = stats.zscore(trajectory.episode_return)
    bonus = 1.0 if trajectory.source == EA else 0.0
    p = alphas.alpha1 * learning + alphas.alpha2 * quality + alphas.alpha3 * bonus
    return max(p, alphas.floor)


@dataclass
class Entry:
    trajectory: Trajectory
    priority: float
    serial: int


@dataclass
class ReplayBuffer:
    capacity: int = 512
    kappa: float = 0.6
    entries: list[Entry] = field(default_factory=list)
    stats: ReturnStats = field(default_factory=ReturnStats)
    inserted: int = 0

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def priorities(self) -> np.ndarray:
        return np.array([e.priority for e in self.entries])

    def insert(self, trajectory: Trajectory, priority: float) -> None:
        """Store and, when over capacity, evict the lowest priority (oldest on ties)."""
        if not (priority > 0 and math.isfinite(priority)):
            raise ValueError(f"priority must be positive and finite, got {priority}")
        self.entries.append(Entry(trajectory, float(priority), self.inserted))
        self.inserted += 1
        self.stats.push(trajectory.episode_return)
        if len(self.entries) > self.capacity:
            worst = min(range(len(self.entries)),
                        key=lambda i: (self.entries[i].priority, self.entries[i].serial))
            del self.entries[worst]

    def probabilities(self, kappa: float | None = None) -> np.ndarray:
        kappa = self.kappa if kappa is None else kappa
        scaled = self.priorities ** kappa
        return scaled / scaled.sum()

    def sample_batch(self, batch_size: int, rng: np.random.Generator, kappa: float | None = None):
        """Draw with replacement; returns (trajectories, indices, probabilities)."""
        if not self.entries:
            raise ValueError("cannot sample from an empty buffer")
        q = self.probabilities(kappa)
        idx = rng.choice(len(q), size=batch_size, replace=True, p=q)
        return [self.entries[i].trajectory for i in idx], idx, q[idx]

    def recent_observations(self, n: int) -> np.ndarray:
        """Up to ``n`` normalized observations from the newest trajectories."""
        chunks, have = [], 0
        for e in sorted(self.entries, key=lambda e: -e.serial):
            chunks.append(e.trajectory.obs[-(n - have):])
            have += len(chunks[-1])
            if have >= n:
                break
        return np.concatenate(chunks) if chunks else np.zeros((0, 19))

    def to_arrays(self) -> tuple[dict, dict[str, np.ndarray]]:
        meta = {"capacity": self.capacity, "kappa": self.kappa, "inserted": self.inserted,
                "stats": [self.stats.count, self.stats.mean, self.stats.m2], "entries": []}
        arrays = {}
        for k, e in enumerate(self.entries):
            t = e.trajectory
            meta["entries"].append({"priority": e.priority, "serial": e.serial, "source": t.source,
                                    "episode_return": t.episode_return, "outcome": t.outcome,
                                    "steps": t.steps})
            for name in Trajectory.ARRAYS:
                arrays[f"t{k}_{name}"] = getattr(t, name)
        return meta, arrays

    @classmethod
    def from_arrays(cls, meta: dict, arrays: dict[str, np.ndarray]) -> "ReplayBuffer":
        buf = cls(meta["capacity"], meta["kappa"])
        buf.inserted = meta["inserted"]
        buf.stats = ReturnStats(*meta["stats"])
        for k, em in enumerate(meta["entries"]):
            t = Trajectory(**{name: arrays[f"t{k}_{name}"] for name in Trajectory.ARRAYS},
                           source=em["source"], episode_return=em["episode_return"],
                           outcome=em["outcome"], steps=em["steps"])
            buf.entries.append(Entry(t, em["priority"], em["serial"]))
        return buf


def importance_weight(n_buf: int, probability: float, beta: float) -> float:
    """Raw correction ``(N * q) ** -beta``."""
    if not 0.0 < probability <= 1.0:
        raise ValueError("probability must be in (0, 1]")
    return (n_buf * probability) ** (-beta)


def importance_weights(n_buf: int, probabilities, beta: float) -> np.ndarray:
    """Batch weights scaled so the largest is 1."""
    w = np.array([importance_weight(n_buf, q, beta) for q in probabilities])
    return w / w.max()


def anneal_beta(step: int, total_steps: int, start: float = 0.4, end: float = 1.0) -> float:
    if total_steps <= 0:
        return end
    frac = min(max(step / total_steps, 0.0), 1.0)
    return start + (end - start) * frac
