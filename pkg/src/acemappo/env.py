"""Two-team combat environment: observations, joint steps, shaped rewards.

Agents are indexed like ``Battlefield.aircraft``: blue (team 0) first, then
red (team 1). Each agent sees the field in its own team frame, so a red agent
facing south sees the same self block as a blue agent facing north in the
mirrored position. Relative and threat blocks are frame-independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import airsim
from .airsim import Action, AircraftState, Battlefield, KillEvent, wrap_angle
from .config import AirsimConfig, EnvConfig

OBS_DIM = 19
SELF_SLICE = slice(0, 8)
REL_SLICE = slice(8, 14)
THREAT_SLICE = slice(14, 19)
# indices into the 19-vector
X, Y, Z, V, THETA, PHI, PSI, NM = range(8)
D_E, THETA_E, V_E, DH_E, V_C, PHI_E = range(8, 14)
D_M, THETA_M, V_M, DH_M, B_M = range(14, 19)
ENEMY_SUMMARY_DIM = 4

ONGOING, BLUE_WIN, RED_WIN, DRAW = "ongoing", "blue_win", "red_win", "draw"


class EnvError(ValueError):
    pass


@dataclass(frozen=True)
class RewardWeights:
    w1: float = 0.3
    w2: float = 0.4
    w3: float = 0.3
    d_max: float = 100_000.0
    d_safe: float = 20_000.0
    win_reward: float = 1000.0

    @classmethod
    def from_config(cls, cfg: EnvConfig) -> "RewardWeights":
        return cls(cfg.w1, cfg.w2, cfg.w3, cfg.d_max, cfg.d_safe, cfg.win_reward)


@dataclass(frozen=True)
class RewardTerms:
    result: float
    advantage: float
    threat: float
    total: float


@dataclass
class Observation:
    """Raw 19-vector plus its network-ready normalized copy."""
    raw: np.ndarray
    norm: np.ndarray

    def __len__(self) -> int:
        return len(self.raw)

    @property
    def b_m(self) -> int:
        return int(self.raw[B_M])


@dataclass
class StepResult:
    battlefield: Battlefield
    observations: dict[int, Observation]
    rewards: dict[int, RewardTerms]
    terminal: bool
    outcome: str
    events: list[KillEvent] = field(default_factory=list)


class CombatEnv:
    """Bundles the configs; every method delegates to the module functions."""

    def __init__(self, env_cfg: EnvConfig | None = None, sim_cfg: AirsimConfig | None = None):
        self.cfg = env_cfg or EnvConfig()
        self.sim = sim_cfg or AirsimConfig()
        self.cfg.validate()
        self.sim.validate()
        self.weights = RewardWeights.from_config(self.cfg)
        self.n_agents = 2 * self.cfg.team_size
        self.state_dim = state_dim(self.cfg.team_size)

    def reset(self, seed) -> tuple[Battlefield, dict[int, Observation]]:
        return reset(self.cfg, self.sim, seed)

    def step(self, bf: Battlefield, joint_actions) -> StepResult:
        return step(bf, joint_actions, self.cfg, self.sim)

    def observe(self, bf: Battlefield, agent_id: int) -> Observation:
        return build_observation(bf, agent_id, self.cfg, self.sim)

    def global_state(self, bf: Battlefield, agent_id: int,
                     observations: dict[int, Observation]) -> np.ndarray:
        return global_state(bf, agent_id, observations, self.cfg, self.sim)

    def team_agents(self, team: int) -> list[int]:
        n = self.cfg.team_size
        return list(range(team * n, (team + 1) * n))


def state_dim(team_size: int) -> int:
    return team_size * OBS_DIM + team_size * ENEMY_SUMMARY_DIM + 1


def reset(env_cfg: EnvConfig, sim_cfg: AirsimConfig, seed) -> tuple[Battlefield, dict[int, Observation]]:
    """Spawn blue near the southern edge and red in the point-mirrored slots."""
    env_cfg.validate()
    n = env_cfg.team_size
    rng = np.random.default_rng(seed)
    jitter = rng.uniform(-env_cfg.lateral_jitter, env_cfg.lateral_jitter, size=n)
    y_mid = 0.5 * sim_cfg.extent_ew
    offsets = (np.arange(n) - 0.5 * (n - 1)) * env_cfg.wingman_spacing
    aircraft = []
    for i in range(n):
        aircraft.append(AircraftState(
            x=env_cfg.spawn_margin, y=float(y_mid + offsets[i] + jitter[i]),
            z=env_cfg.init_altitude, v=env_cfg.init_speed, psi=0.0,
            n_m=sim_cfg.missiles_per_aircraft, team=0, uid=i))
    for i in range(n):
        b = aircraft[i]
        aircraft.append(AircraftState(
            x=sim_cfg.extent_ns - b.x, y=sim_cfg.extent_ew - b.y,
            z=env_cfg.init_altitude, v=env_cfg.init_speed, psi=math.pi,
            n_m=sim_cfg.missiles_per_aircraft, team=1, uid=n + i))
    bf = Battlefield(sim_cfg.extent_ns, sim_cfg.extent_ew, aircraft)
    obs = {a.uid: build_observation(bf, a.uid, env_cfg, sim_cfg) for a in aircraft}
    return bf, obs


def compute_ata(own: AircraftState, enemy: AircraftState) -> float:
    """Angle between own velocity and the line of sight to ``enemy``, in [0, pi]."""
    vo = own.velocity
    los = (enemy.x - own.x, enemy.y - own.y, enemy.z - own.z)
    nv = math.sqrt(vo[0] ** 2 + vo[1] ** 2 + vo[2] ** 2)
    nl = math.sqrt(los[0] ** 2 + los[1] ** 2 + los[2] ** 2)
    if nv == 0.0 or nl == 0.0:
        raise EnvError("ATA undefined for zero-length velocity or line of sight")
    c = (vo[0] * los[0] + vo[1] * los[1] + vo[2] * los[2]) / (nv * nl)
    return math.acos(max(-1.0, min(1.0, c)))


def nearest_enemy(bf: Battlefield, agent_id: int) -> int | None:
    me = bf.aircraft[agent_id]
    best, best_d = None, math.inf
    for j, a in enumerate(bf.aircraft):
        if a.team != me.team and a.alive:
            d = airsim.distance(me.position, a.position)
            if d < best_d:
                best, best_d = j, d
    return best


def nearest_threat(bf: Battlefield, agent_id: int) -> int | None:
    me = bf.aircraft[agent_id]
    best, best_d = None, math.inf
    for k, m in enumerate(bf.missiles):
        if m.active and m.target_id == agent_id:
            d = airsim.distance(me.position, m.position)
            if d < best_d:
                best, best_d = k, d
    return best


def _scales(env_cfg: EnvConfig, sim_cfg: AirsimConfig) -> np.ndarray:
    pi = math.pi
    return np.array([
        sim_cfg.extent_ns, sim_cfg.extent_ew, sim_cfg.alt_max, sim_cfg.v_max, pi, pi, pi,
        float(max(sim_cfg.missiles_per_aircraft, 1)),
        env_cfg.d_max, pi, sim_cfg.v_max, sim_cfg.alt_max, sim_cfg.v_max, pi,
        env_cfg.d_max, pi, sim_cfg.missile_speed, sim_cfg.alt_max, 1.0,
    ])


def _sentinel_rel(env_cfg: EnvConfig, sim_cfg: AirsimConfig) -> list[float]:
    return [env_cfg.d_max, math.pi, sim_cfg.v_max, sim_cfg.alt_max, sim_cfg.v_max, math.pi]


def threat_sentinel(env_cfg: EnvConfig, sim_cfg: AirsimConfig) -> list[float]:
    """Raw threat block when no missile is inbound; normalizes to (1, 1, 1, 1, 0)."""
    return [env_cfg.d_max, math.pi, sim_cfg.missile_speed, sim_cfg.alt_max, 0.0]


def _team_frame(a: AircraftState, extent_ns: float, extent_ew: float) -> tuple[float, float, float]:
    if a.team == 0:
        return a.x, a.y, a.psi
    return extent_ns - a.x, extent_ew - a.y, wrap_angle(a.psi + math.pi)


def build_observation(bf: Battlefield, agent_id: int, env_cfg: EnvConfig | None = None,
                      sim_cfg: AirsimConfig | None = None) -> Observation:
    env_cfg = env_cfg or EnvConfig()
    sim_cfg = sim_cfg or AirsimConfig()
    me = bf.aircraft[agent_id]
    if not me.alive:
        raise EnvError(f"agent {agent_id} is dead")
    sx, sy, spsi = _team_frame(me, bf.extent_ns, bf.extent_ew)
    raw = [sx, sy, me.z, me.v, me.theta, me.phi, spsi, float(me.n_m)]
    vo = me.velocity

    j = nearest_enemy(bf, agent_id)
    if j is None:
        raw += _sentinel_rel(env_cfg, sim_cfg)
    else:
        e = bf.aircraft[j]
        los = (e.x - me.x, e.y - me.y, e.z - me.z)
        d = math.sqrt(los[0] ** 2 + los[1] ** 2 + los[2] ** 2)
        ve = e.velocity
        if d > 0.0:
            u = (los[0] / d, los[1] / d, los[2] / d)
            closing = (vo[0] - ve[0]) * u[0] + (vo[1] - ve[1]) * u[1] + (vo[2] - ve[2]) * u[2]
            aspect = math.acos(max(-1.0, min(1.0, (ve[0] * u[0] + ve[1] * u[1] + ve[2] * u[2]) / e.v)))
        else:
            closing, aspect = 0.0, 0.0
        bearing = wrap_angle(math.atan2(los[1], los[0]) - me.psi)
        raw += [d, bearing, me.v - e.v, me.z - e.z, closing, aspect]

    k = nearest_threat(bf, agent_id)
    if k is None:
        raw += threat_sentinel(env_cfg, sim_cfg)
    else:
        m = bf.missiles[k]
        rel = (m.position[0] - me.x, m.position[1] - me.y, m.position[2] - me.z)
        d = math.sqrt(rel[0] ** 2 + rel[1] ** 2 + rel[2] ** 2)
        vm = (m.speed * m.direction[0], m.speed * m.direction[1], m.speed * m.direction[2])
        if d > 0.0:
            approach = -((vm[0] - vo[0]) * rel[0] + (vm[1] - vo[1]) * rel[1]
                         + (vm[2] - vo[2]) * rel[2]) / d
        else:
            approach = m.speed
        bearing = wrap_angle(math.atan2(rel[1], rel[0]) - me.psi)
        raw += [d, bearing, approach, me.z - m.position[2], 1.0]

    raw_arr = np.array(raw)
    return Observation(raw_arr, raw_arr / _scales(env_cfg, sim_cfg))


def global_state(bf: Battlefield, agent_id: int, observations: dict[int, Observation],
                 env_cfg: EnvConfig, sim_cfg: AirsimConfig) -> np.ndarray:
    """Critic input: own obs, teammates' obs, enemy kinematics, time left.

    The owning agent's observation always comes first so the centralized value
    is agent-specific. Dead slots are zero.
    """
    me = bf.aircraft[agent_id]
    n = env_cfg.team_size
    mates = [agent_id] + [a.uid for a in bf.aircraft if a.team == me.team and a.uid != agent_id]
    parts = []
    for uid in mates:
        o = observations.get(uid)
        parts.append(o.norm if o is not None and bf.aircraft[uid].alive else np.zeros(OBS_DIM))
    for e in bf.aircraft:
        if e.team == me.team:
            continue
        if e.alive:
            ex, ey, _ = (bf.extent_ns - e.x, bf.extent_ew - e.y, 0) if me.team == 1 else (e.x, e.y, 0)
            parts.append(np.array([ex / bf.extent_ns, ey / bf.extent_ew,
                                   e.z / sim_cfg.alt_max, e.v / sim_cfg.v_max]))
        else:
            parts.append(np.zeros(ENEMY_SUMMARY_DIM))
    remaining = 1.0 - bf.step_count / env_cfg.max_steps
    parts.append(np.array([remaining]))
    out = np.concatenate(parts)
    assert out.shape[0] == state_dim(n)
    return out


def evaluate_outcome(bf: Battlefield, env_cfg: EnvConfig) -> str:
    blue, red = bf.alive_count(0), bf.alive_count(1)
    if blue == 0 and red == 0:
        return DRAW
    if red == 0:
        return BLUE_WIN
    if blue == 0:
        return RED_WIN
    if bf.step_count >= env_cfg.max_steps:
        if blue > red:
            return BLUE_WIN
        if red > blue:
            return RED_WIN
        return DRAW
    return ONGOING


def result_reward(outcome: str, team: int, win_reward: float = 1000.0) -> float:
    if outcome == BLUE_WIN:
        return win_reward if team == 0 else -win_reward
    if outcome == RED_WIN:
        return win_reward if team == 1 else -win_reward
    return 0.0


def advantage_reward(ata: float, d_e: float, d_max: float) -> float:
    return (1.0 - ata / math.pi) * math.exp(-d_e / d_max)


def threat_reward(b_m: int, d_m: float, d_safe: float) -> float:
    return -math.exp(-d_m / d_safe) if b_m == 1 else 0.0


def compute_reward(bf_before: Battlefield, joint_action, bf_after: Battlefield, agent_id: int,
                   weights: RewardWeights, env_cfg: EnvConfig | None = None) -> RewardTerms:
    """Composite reward for one agent over one transition.

    Geometry is read from ``bf_after``. The result term is nonzero only when
    the transition ends the episode.
    """
    env_cfg = env_cfg or EnvConfig()
    me = bf_after.aircraft[agent_id]
    outcome = evaluate_outcome(bf_after, env_cfg)
    r_result = result_reward(outcome, me.team, weights.win_reward)

    r_adv = 0.0
    j = nearest_enemy(bf_after, agent_id)
    if j is not None:
        e = bf_after.aircraft[j]
        d_e = airsim.distance(me.position, e.position)
        if d_e > 0.0:
            r_adv = advantage_reward(compute_ata(me, e), d_e, weights.d_max)
        else:
            r_adv = 1.0

    r_thr = 0.0
    k = nearest_threat(bf_after, agent_id)
    if k is not None:
        d_m = airsim.distance(me.position, bf_after.missiles[k].position)
        r_thr = threat_reward(1, d_m, weights.d_safe)

    total = weights.w1 * r_result + weights.w2 * r_adv + weights.w3 * r_thr
    return RewardTerms(r_result, r_adv, r_thr, total)


def _normalize_joint(bf: Battlefield, joint_actions) -> list[int | None]:
    n = len(bf.aircraft)
    if isinstance(joint_actions, dict):
        acts = [joint_actions.get(i) for i in range(n)]
    else:
        acts = list(joint_actions)
        if len(acts) != n:
            raise EnvError(f"expected {n} actions, got {len(acts)}")
    out: list[int | None] = []
    for i, a in enumerate(acts):
        if not bf.aircraft[i].alive:
            out.append(None)
            continue
        if a is None or isinstance(a, bool) or int(a) != a or not 0 <= int(a) < airsim.N_ACTIONS:
            raise EnvError(f"malformed action {a!r} for agent {i}")
        out.append(int(a))
    return out


def step(bf: Battlefield, joint_actions, env_cfg: EnvConfig | None = None,
         sim_cfg: AirsimConfig | None = None) -> StepResult:
    """Apply all commands at once, fly missiles, resolve kills, score."""
    env_cfg = env_cfg or EnvConfig()
    sim_cfg = sim_cfg or AirsimConfig()
    if evaluate_outcome(bf, env_cfg) != ONGOING:
        raise EnvError("episode already terminated")
    acts = _normalize_joint(bf, joint_actions)
    dt = env_cfg.dt

    after = bf.copy()
    for i, a in enumerate(acts):
        if a is None:
            continue
        me = bf.aircraft[i]
        notch = None
        if a == Action.NOTCH:
            k = nearest_threat(bf, i)
            if k is not None:
                p = bf.missiles[k].position
                notch = math.atan2(p[1] - me.y, p[0] - me.x)
            else:
                j = nearest_enemy(bf, i)
                if j is not None:
                    e = bf.aircraft[j]
                    notch = math.atan2(e.y - me.y, e.x - me.x)
        after.aircraft[i] = airsim.apply_command_and_step(me, a, dt, sim_cfg, notch)

    after = airsim.step_missiles(after, dt, sim_cfg)
    for i, a in enumerate(acts):
        if a == Action.FIRE:
            j = nearest_enemy(after, i)
            if j is None:
                after.wasted_launches += 1
            else:
                after = airsim.spawn_missile(after, i, j, sim_cfg)
    after, events = airsim.check_outcomes(after, sim_cfg)
    after.step_count = bf.step_count + 1

    outcome = evaluate_outcome(after, env_cfg)
    terminal = outcome != ONGOING
    weights = RewardWeights.from_config(env_cfg)
    rewards = {i: compute_reward(bf, acts, after, i, weights, env_cfg)
               for i, a in enumerate(acts) if a is not None}
    observations = {a.uid: build_observation(after, a.uid, env_cfg, sim_cfg)
                    for a in after.aircraft if a.alive}
    return StepResult(after, observations, rewards, terminal, outcome, events)
