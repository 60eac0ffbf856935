"""Per-episode trajectory CSVs for offline replay and plotting.

One row per simulation step, row 0 being the spawn state. Columns:

    step, sim_time,
    ac{k}_id, ac{k}_team, ac{k}_x, ac{k}_y, ac{k}_z, ac{k}_v, ac{k}_theta,
    ac{k}_phi, ac{k}_psi, ac{k}_n_m, ac{k}_alive              for each aircraft k
    ms{m}_id, ms{m}_x, ms{m}_y, ms{m}_z, ms{m}_target, ms{m}_active
                                                            for each missile slot m
    ag{k}_action, ag{k}_r_result, ag{k}_r_advantage, ag{k}_r_threat, ag{k}_reward
                                                            for each agent k

Missile slots that have not been used yet, and agent columns on row 0 or
after an agent's death, are left empty.
"""

from __future__ import annotations

import csv
import os
from pathlib import Path

import numpy as np

from ..config import TrainConfig
from ..env import CombatEnv
from ..policies import Policy
from ..rollout import as_seed_sequence, run_episode

AIRCRAFT_COLS = ("id", "team", "x", "y", "z", "v", "theta", "phi", "psi", "n_m", "alive")
MISSILE_COLS = ("id", "x", "y", "z", "target", "active")
AGENT_COLS = ("action", "r_result", "r_advantage", "r_threat", "reward")


def export_header(n_aircraft: int, missile_slots: int) -> list[str]:
    cols = ["step", "sim_time"]
    for k in range(n_aircraft):
        cols += [f"ac{k}_{c}" for c in AIRCRAFT_COLS]
    for m in range(missile_slots):
        cols += [f"ms{m}_{c}" for c in MISSILE_COLS]
    for k in range(n_aircraft):
        cols += [f"ag{k}_{c}" for c in AGENT_COLS]
    return cols


def _row(bf, missile_slots: int, actions=None, rewards=None) -> list:
    r = lambda v: repr(float(v))  # noqa: E731
    row = [bf.step_count, r(bf.sim_time)]
    for a in bf.aircraft:
        row += [a.uid, a.team, r(a.x), r(a.y), r(a.z), r(a.v), r(a.theta), r(a.phi), r(a.psi),
                a.n_m, int(a.alive)]
    for m in range(missile_slots):
        if m < len(bf.missiles):
            ms = bf.missiles[m]
            row += [m, r(ms.position[0]), r(ms.position[1]), r(ms.position[2]), ms.target_id,
                    int(ms.active)]
        else:
            row += [""] * len(MISSILE_COLS)
    for k in range(len(bf.aircraft)):
        if actions is not None and rewards is not None and k in rewards:
            t = rewards[k]
            row += [actions[k], r(t.result), r(t.advantage), r(t.threat), r(t.total)]
        else:
            row += [""] * len(AGENT_COLS)
    return row


def export_trajectories(blue: Policy, red: Policy, episodes: int, out_dir, seed=0,
                        cfg: TrainConfig | None = None) -> list[Path]:
    cfg = cfg or TrainConfig()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if not os.access(out_dir, os.W_OK):
        raise PermissionError(f"cannot write to {out_dir}")
    env = CombatEnv(cfg.env, cfg.airsim)
    slots = env.n_agents * cfg.airsim.missiles_per_aircraft
    header = export_header(env.n_agents, slots)
    paths = []
    for i, ss in enumerate(as_seed_sequence(seed).spawn(episodes)):
        path = out_dir / f"episode_{i:04d}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            run_episode(env, blue, red, ss,
                        on_reset=lambda bf, obs: w.writerow(_row(bf, slots)),
                        on_step=lambda res, joint: w.writerow(
                            _row(res.battlefield, slots, joint, res.rewards)))
        paths.append(path)
    return paths
