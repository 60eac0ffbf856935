"""Point-mass aircraft and missile kinematics on a rectangular battlefield.

Ground frame: ``x`` points north, ``y`` east, ``z`` up. Yaw ``psi`` is measured
from north toward east, so a heading of +pi/2 flies due east. The field spans
``[0, extent_ns]`` along x and ``[0, extent_ew]`` along y.

All operations are value-style: they return new states and never mutate their
inputs, so independent battlefields can be stepped from many workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import IntEnum

from .config import AirsimConfig

GRAVITY = 9.80665
TWO_PI = 2.0 * math.pi


class Action(IntEnum):
    STRAIGHT = 0
    TURN_LEFT = 1
    TURN_RIGHT = 2
    CLIMB = 3
    DIVE = 4
    ACCELERATE = 5
    DECELERATE = 6
    S_TURN = 7
    NOTCH = 8
    FIRE = 9


N_ACTIONS = len(Action)


class SimError(ValueError):
    pass


def wrap_angle(a: float) -> float:
    """Map an angle onto (-pi, pi]."""
    return math.pi - ((math.pi - a) % TWO_PI)


@dataclass(frozen=True)
class AircraftState:
    x: float
    y: float
    z: float
    v: float
    theta: float = 0.0
    phi: float = 0.0
    psi: float = 0.0
    n_m: int = 4
    alive: bool = True
    team: int = 0
    uid: int = 0

    @property
    def position(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)

    @property
    def velocity(self) -> tuple[float, float, float]:
        ct = math.cos(self.theta)
        return (self.v * ct * math.cos(self.psi),
                self.v * ct * math.sin(self.psi),
                self.v * math.sin(self.theta))


@dataclass(frozen=True)
class MissileState:
    position: tuple[float, float, float]
    direction: tuple[float, float, float]
    speed: float
    target_id: int
    shooter_id: int
    time_of_flight: float = 0.0
    active: bool = True


@dataclass(frozen=True)
class KillEvent:
    aircraft: int
    cause: str  # "missile" or "boundary"
    missile: int | None = None
    shooter: int | None = None


@dataclass
class Battlefield:
    extent_ns: float
    extent_ew: float
    aircraft: list[AircraftState]
    missiles: list[MissileState] = field(default_factory=list)
    sim_time: float = 0.0
    step_count: int = 0
    wasted_launches: int = 0

    def team(self, team: int) -> list[AircraftState]:
        return [a for a in self.aircraft if a.team == team]

    def alive_count(self, team: int) -> int:
        return sum(1 for a in self.aircraft if a.team == team and a.alive)

    def copy(self) -> "Battlefield":
        return replace(self, aircraft=list(self.aircraft), missiles=list(self.missiles))


def _norm(v) -> float:
    return math.sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])


def _sub(a, b):
    return (a[0] - b[0], a[1] - b[1], a[2] - b[2])


def distance(a, b) -> float:
    return _norm(_sub(a, b))


def _move_toward(value: float, target: float, max_step: float) -> float:
    if target > value:
        return min(target, value + max_step)
    return max(target, value - max_step)


def apply_command_and_step(state: AircraftState, command: int, dt: float,
                           cfg: AirsimConfig | None = None,
                           notch_bearing: float | None = None) -> AircraftState:
    """Advance one aircraft ``dt`` seconds under a tactical command.

    Every command except STRAIGHT is tracked with bounded rates. STRAIGHT keeps
    the velocity vector untouched, so straight flight integrates exactly.
    ``notch_bearing`` is the ground bearing of the threat the NOTCH command
    should beam; with no threat the aircraft flies straight.
    """
    cfg = cfg or AirsimConfig()
    if not state.alive:
        raise SimError(f"aircraft {state.uid} is dead")
    if dt <= 0:
        raise SimError("dt must be positive")
    try:
        command = Action(command)
    except ValueError:
        raise SimError(f"unknown command {command!r}") from None

    omega = math.radians(cfg.turn_rate_deg)
    max_turn = min(omega * dt, cfg.turn_magnitude)
    theta, psi, v = state.theta, state.psi, state.v
    turn = 0.0
    target_pitch = 0.0

    if command is Action.STRAIGHT or command is Action.FIRE:
        target_pitch = theta
    elif command is Action.TURN_LEFT:
        turn = -max_turn
    elif command is Action.TURN_RIGHT:
        turn = max_turn
    elif command is Action.CLIMB:
        target_pitch = math.asin(min(1.0, cfg.climb_rate / v))
    elif command is Action.DIVE:
        target_pitch = -math.asin(min(1.0, cfg.climb_rate / v))
    elif command is Action.ACCELERATE:
        v = min(cfg.v_max, v + cfg.accel * dt)
    elif command is Action.DECELERATE:
        v = max(cfg.v_min, v - cfg.accel * dt)
    elif command is Action.S_TURN:
        # reverse the bank every step: heading oscillates around its mean
        turn = -max_turn if state.phi > 0 else max_turn
    elif command is Action.NOTCH:
        if notch_bearing is None:
            target_pitch = theta
        else:
            # beam the threat: pick the perpendicular heading closest to ours
            a = wrap_angle(notch_bearing + math.pi / 2 - psi)
            b = wrap_angle(notch_bearing - math.pi / 2 - psi)
            err = a if abs(a) <= abs(b) else b
            turn = max(-max_turn, min(max_turn, err))

    if command is not Action.STRAIGHT and command is not Action.FIRE:
        theta = _move_toward(theta, target_pitch, math.radians(cfg.pitch_rate_deg) * dt)
    theta = max(-math.pi / 2, min(math.pi / 2, theta))
    psi_new = wrap_angle(psi + turn)
    v = max(cfg.v_min, min(cfg.v_max, v))
    if turn != 0.0:
        phi = math.copysign(math.atan(v * abs(turn) / dt / GRAVITY), turn)
    else:
        phi = 0.0

    if command is Action.STRAIGHT or command is Action.FIRE:
        ct = math.cos(theta)
        dx = v * ct * math.cos(psi) * dt
        dy = v * ct * math.sin(psi) * dt
        dz = v * math.sin(theta) * dt
    else:
        # trapezoidal rule on the velocity vector
        c0, c1 = math.cos(state.theta), math.cos(theta)
        dx = 0.5 * dt * (state.v * c0 * math.cos(psi) + v * c1 * math.cos(psi_new))
        dy = 0.5 * dt * (state.v * c0 * math.sin(psi) + v * c1 * math.sin(psi_new))
        dz = 0.5 * dt * (state.v * math.sin(state.theta) + v * math.sin(theta))

    return replace(state, x=state.x + dx, y=state.y + dy, z=state.z + dz, v=v,
                   theta=theta, phi=phi, psi=psi_new)


def spawn_missile(battlefield: Battlefield, shooter_id: int, target_id: int,
                  cfg: AirsimConfig | None = None) -> Battlefield:
    """Launch a missile from ``shooter_id`` at ``target_id``.

    An empty rail or a dead target is a wasted action: the battlefield comes
    back unchanged apart from ``wasted_launches``.
    """
    cfg = cfg or AirsimConfig()
    out = battlefield.copy()
    shooter = out.aircraft[shooter_id]
    target = out.aircraft[target_id]
    if not shooter.alive:
        raise SimError(f"aircraft {shooter_id} is dead")
    if shooter.n_m <= 0 or not target.alive:
        out.wasted_launches += 1
        return out
    vel = shooter.velocity
    speed = _norm(vel)
    direction = (vel[0] / speed, vel[1] / speed, vel[2] / speed)
    out.aircraft[shooter_id] = replace(shooter, n_m=shooter.n_m - 1)
    out.missiles.append(MissileState(position=shooter.position, direction=direction,
                                     speed=cfg.missile_speed, target_id=target_id,
                                     shooter_id=shooter_id))
    return out


def _rotate_toward(d, goal, max_angle: float):
    """Rotate unit vector ``d`` toward unit vector ``goal`` by at most ``max_angle``."""
    cos_a = max(-1.0, min(1.0, d[0] * goal[0] + d[1] * goal[1] + d[2] * goal[2]))
    angle = math.acos(cos_a)
    if angle <= max_angle:
        return goal
    # component of goal orthogonal to d
    perp = (goal[0] - cos_a * d[0], goal[1] - cos_a * d[1], goal[2] - cos_a * d[2])
    n = _norm(perp)
    if n < 1e-12:
        # anti-parallel: any orthogonal axis works; use the horizontal one
        perp = (-d[1], d[0], 0.0)
        n = _norm(perp)
        if n < 1e-12:
            perp, n = (1.0, 0.0, 0.0), 1.0
    perp = (perp[0] / n, perp[1] / n, perp[2] / n)
    c, s = math.cos(max_angle), math.sin(max_angle)
    return (c * d[0] + s * perp[0], c * d[1] + s * perp[1], c * d[2] + s * perp[2])


def step_missiles(battlefield: Battlefield, dt: float,
                  cfg: AirsimConfig | None = None) -> Battlefield:
    """Pure-pursuit guidance at constant speed with a bounded turn rate.

    A missile whose target is dead, or whose flight time has reached the
    lifetime, deactivates. If the target's current position passes within the
    kill radius of the path flown this step, the missile is parked at the
    point of closest approach so ``check_outcomes`` registers the hit.
    """
    cfg = cfg or AirsimConfig()
    if dt <= 0:
        raise SimError("dt must be positive")
    out = battlefield.copy()
    max_turn = math.radians(cfg.missile_turn_rate_deg) * dt
    for i, m in enumerate(out.missiles):
        if not m.active:
            continue
        target = out.aircraft[m.target_id]
        if not target.alive or m.time_of_flight >= cfg.missile_lifetime:
            out.missiles[i] = replace(m, active=False)
            continue
        tpos = target.position
        los = _sub(tpos, m.position)
        rng = _norm(los)
        if rng <= cfg.kill_radius:
            out.missiles[i] = replace(m, time_of_flight=m.time_of_flight + dt)
            continue
        goal = (los[0] / rng, los[1] / rng, los[2] / rng)
        d = _rotate_toward(m.direction, goal, max_turn)
        step = m.speed * dt
        p0 = m.position
        p1 = (p0[0] + step * d[0], p0[1] + step * d[1], p0[2] + step * d[2])
        # closest approach of the flown segment to the target
        s = max(0.0, min(1.0, (los[0] * d[0] + los[1] * d[1] + los[2] * d[2]) / step))
        closest = (p0[0] + s * step * d[0], p0[1] + s * step * d[1], p0[2] + s * step * d[2])
        new_pos = closest if distance(closest, tpos) <= cfg.kill_radius else p1
        tof = min(m.time_of_flight + dt, cfg.missile_lifetime)
        out.missiles[i] = replace(m, position=new_pos, direction=d, time_of_flight=tof)
    out.sim_time = battlefield.sim_time + dt
    return out


def out_of_bounds(a: AircraftState, extent_ns: float, extent_ew: float,
                  cfg: AirsimConfig) -> bool:
    return not (0.0 <= a.x <= extent_ns and 0.0 <= a.y <= extent_ew
                and cfg.alt_min <= a.z <= cfg.alt_max)


def check_outcomes(battlefield: Battlefield, cfg: AirsimConfig | None = None
                   ) -> tuple[Battlefield, list[KillEvent]]:
    """Resolve missile hits and boundary crashes.

    Returns the updated battlefield (hit missiles inactive, killed aircraft
    dead) and the kill events in aircraft order.
    """
    cfg = cfg or AirsimConfig()
    out = battlefield.copy()
    events: list[KillEvent] = []
    killed: set[int] = set()
    for i, m in enumerate(out.missiles):
        if not m.active:
            continue
        target = out.aircraft[m.target_id]
        if not target.alive:
            continue
        if distance(m.position, target.position) <= cfg.kill_radius:
            out.missiles[i] = replace(m, active=False)
            if m.target_id not in killed:
                killed.add(m.target_id)
                events.append(KillEvent(m.target_id, "missile", i, m.shooter_id))
    for j, a in enumerate(out.aircraft):
        if a.alive and j not in killed and out_of_bounds(a, out.extent_ns, out.extent_ew, cfg):
            killed.add(j)
            events.append(KillEvent(j, "boundary"))
    for j in killed:
        out.aircraft[j] = replace(out.aircraft[j], alive=False)
    events.sort(key=lambda e: e.aircraft)
    return out, events
