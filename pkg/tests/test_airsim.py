import math
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from acemappo.airsim import (Action, AircraftState, Battlefield, MissileState, SimError,
                             apply_command_and_step, check_outcomes, distance, spawn_missile,
                             step_missiles, wrap_angle)
from acemappo.config import AirsimConfig

from .conftest import aircraft, duel

CFG = AirsimConfig()


def test_straight_flight_moves_along_heading():
    s = aircraft(0, 0, 1000.0, 2000.0, psi=0.3)
    out = apply_command_and_step(s, Action.STRAIGHT, 1.0)
    assert out.x - s.x == pytest.approx(180.0 * math.cos(0.3), abs=1e-9)
    assert out.y - s.y == pytest.approx(180.0 * math.sin(0.3), abs=1e-9)
    assert out.z == s.z


def test_climb_raises_altitude():
    out = apply_command_and_step(aircraft(0, 0, 0.0, 0.0), Action.CLIMB, 1.0)
    assert out.z > 3000.0
    assert out.theta > 0


def test_dive_lowers_altitude_after_pitch_builds():
    s = aircraft(0, 0, 0.0, 0.0)
    for _ in range(3):
        s = apply_command_and_step(s, Action.DIVE, 1.0)
    assert s.z < 3000.0


def test_accelerate_saturates_at_vmax():
    out = apply_command_and_step(aircraft(0, 0, 0.0, 0.0, v=CFG.v_max), Action.ACCELERATE, 1.0)
    assert out.v == CFG.v_max


def test_decelerate_saturates_at_vmin():
    out = apply_command_and_step(aircraft(0, 0, 0.0, 0.0, v=CFG.v_min), Action.DECELERATE, 1.0)
    assert out.v == CFG.v_min


def test_turns_are_rate_limited_and_signed():
    s = aircraft(0, 0, 0.0, 0.0)
    left = apply_command_and_step(s, Action.TURN_LEFT, 1.0)
    right = apply_command_and_step(s, Action.TURN_RIGHT, 1.0)
    assert left.psi == pytest.approx(-math.radians(10.0))
    assert right.psi == pytest.approx(math.radians(10.0))
    assert left.phi < 0 < right.phi


def test_turn_magnitude_caps_long_steps():
    s = aircraft(0, 0, 0.0, 0.0)
    assert apply_command_and_step(s, Action.TURN_RIGHT, 10.0).psi == pytest.approx(math.radians(30))
    big = AirsimConfig(turn_large=True)
    assert apply_command_and_step(s, Action.TURN_RIGHT, 10.0, big).psi == pytest.approx(math.radians(60))


def test_s_turn_alternates_bank():
    s = aircraft(0, 0, 0.0, 0.0)
    a = apply_command_and_step(s, Action.S_TURN, 1.0)
    b = apply_command_and_step(a, Action.S_TURN, 1.0)
    assert a.phi * b.phi < 0
    assert b.psi == pytest.approx(0.0, abs=1e-12)


def test_notch_turns_toward_beam():
    s = aircraft(0, 0, 0.0, 0.0, psi=0.0)
    # threat due north: beaming means heading +-90 deg, so the heading must move off 0
    out = apply_command_and_step(s, Action.NOTCH, 1.0, notch_bearing=0.0)
    assert abs(out.psi) == pytest.approx(math.radians(10.0))
    # already on the beam: no turn
    beam = apply_command_and_step(replace(s, psi=math.pi / 2), Action.NOTCH, 1.0, notch_bearing=0.0)
    assert beam.psi == pytest.approx(math.pi / 2)


def test_dead_aircraft_rejected():
    with pytest.raises(SimError):
        apply_command_and_step(replace(aircraft(0, 0, 0, 0), alive=False), 0, 1.0)


@pytest.mark.parametrize("cmd", [-1, 10, 3.5])
def test_unknown_command_rejected(cmd):
    with pytest.raises(SimError):
        apply_command_and_step(aircraft(0, 0, 0, 0), cmd, 1.0)


def test_nonpositive_dt_rejected():
    with pytest.raises(SimError):
        apply_command_and_step(aircraft(0, 0, 0, 0), 0, 0.0)


def test_wrap_angle_range():
    assert wrap_angle(math.pi) == math.pi
    assert wrap_angle(-math.pi) == math.pi
    assert wrap_angle(3 * math.pi / 2) == pytest.approx(-math.pi / 2)


# -- missiles ---------------------------------------------------------------

def test_fire_decrements_and_spawns():
    bf = spawn_missile(duel(), 0, 1)
    assert bf.aircraft[0].n_m == 3
    assert len(bf.missiles) == 1 and bf.missiles[0].active
    assert bf.missiles[0].position == bf.aircraft[0].position


def test_fire_with_empty_rail_is_noop():
    bf = duel(blue=aircraft(0, 0, 50_000.0, 50_000.0, n_m=0))
    out = spawn_missile(bf, 0, 1)
    assert out.aircraft == bf.aircraft and out.missiles == []
    assert out.wasted_launches == 1


def test_fire_at_dead_target_is_noop():
    bf = duel(red=aircraft(1, 1, 80_000.0, 50_000.0, alive=False))
    out = spawn_missile(bf, 0, 1)
    assert out.missiles == [] and out.aircraft[0].n_m == 4


def test_two_launches_give_two_missiles():
    bf = spawn_missile(spawn_missile(duel(), 0, 1), 0, 1)
    assert len(bf.missiles) == 2 and all(m.active for m in bf.missiles)
    assert bf.aircraft[0].n_m == 2


def test_spawn_does_not_mutate_input():
    bf = duel()
    spawn_missile(bf, 0, 1)
    assert bf.missiles == [] and bf.aircraft[0].n_m == 4


def _tail_chase(gap=1000.0, closing=300.0):
    target = aircraft(1, 1, 50_000.0 + gap, 50_000.0, v=180.0)
    m = MissileState((50_000.0, 50_000.0, 3000.0), (1.0, 0.0, 0.0), 180.0 + closing, 1, 0)
    return Battlefield(200_000.0, 100_000.0, [aircraft(0, 0, 10_000.0, 50_000.0), target], [m])


def test_pursuit_closes_distance():
    bf = _tail_chase()
    d0 = distance(bf.missiles[0].position, bf.aircraft[1].position)
    target = apply_command_and_step(bf.aircraft[1], Action.STRAIGHT, 0.1)
    bf.aircraft[1] = target
    out = step_missiles(bf, 0.1)
    assert distance(out.missiles[0].position, target.position) < d0


def test_missile_expires_at_lifetime():
    bf = _tail_chase(gap=50_000.0)
    bf.missiles[0] = replace(bf.missiles[0], time_of_flight=CFG.missile_lifetime)
    assert not step_missiles(bf, 1.0).missiles[0].active


def test_missile_deactivates_when_target_dead():
    bf = _tail_chase(gap=50_000.0)
    bf.aircraft[1] = replace(bf.aircraft[1], alive=False)
    assert not step_missiles(bf, 1.0).missiles[0].active


def test_time_of_flight_capped():
    bf = _tail_chase(gap=55_000.0)
    bf.missiles[0] = replace(bf.missiles[0], time_of_flight=CFG.missile_lifetime - 0.5)
    assert step_missiles(bf, 1.0).missiles[0].time_of_flight <= CFG.missile_lifetime


def test_inactive_missile_not_stepped():
    bf = _tail_chase()
    bf.missiles[0] = replace(bf.missiles[0], active=False)
    assert step_missiles(bf, 1.0).missiles[0] == bf.missiles[0]


def test_fast_missile_does_not_tunnel_through_target():
    # 1000 m/s over a 1 s step passes a target 500 m ahead; closest approach must register
    bf = _tail_chase(gap=500.0, closing=820.0)
    out, events = check_outcomes(step_missiles(bf, 1.0))
    assert [e.cause for e in events] == ["missile"]
    assert not out.aircraft[1].alive


def test_sim_time_advances():
    assert step_missiles(duel(), 1.0).sim_time == 1.0


# -- outcomes ---------------------------------------------------------------

def test_boundary_kill_north():
    bf = duel(blue=aircraft(0, 0, 201_000.0, 50_000.0))
    out, events = check_outcomes(bf)
    assert [(e.aircraft, e.cause) for e in events] == [(0, "boundary")]
    assert not out.aircraft[0].alive


@pytest.mark.parametrize("x,y,z", [(-1.0, 5e4, 3e3), (1e5, 100_001.0, 3e3), (1e5, -5.0, 3e3),
                                   (1e5, 5e4, 99.0), (1e5, 5e4, 20_001.0)])
def test_boundary_kill_all_faces(x, y, z):
    _, events = check_outcomes(duel(blue=aircraft(0, 0, x, y, z=z)))
    assert events and events[0].cause == "boundary"


def test_missile_kill_inside_radius():
    bf = duel()
    target = bf.aircraft[1]
    pos = (target.x - (CFG.kill_radius - 1.0), target.y, target.z)
    bf.missiles.append(MissileState(pos, (1.0, 0.0, 0.0), 1000.0, 1, 0))
    out, events = check_outcomes(bf)
    assert [(e.aircraft, e.cause, e.shooter) for e in events] == [(1, "missile", 0)]
    assert not out.missiles[0].active and not out.aircraft[1].alive


def test_missile_outside_radius_no_kill():
    bf = duel()
    t = bf.aircraft[1]
    bf.missiles.append(MissileState((t.x - CFG.kill_radius - 1.0, t.y, t.z), (1, 0, 0), 1000.0, 1, 0))
    assert check_outcomes(bf)[1] == []


def test_interior_no_events():
    bf = duel()
    out, events = check_outcomes(bf)
    assert events == [] and out.aircraft == bf.aircraft


# -- properties ---------------------------------------------------------------

headings = st.floats(-math.pi, math.pi, allow_nan=False)
pitches = st.floats(-0.5, 0.5)
speeds = st.floats(100.0, 400.0)


@given(psi=headings, theta=pitches, v=speeds, dt=st.floats(0.05, 5.0))
def test_straight_flight_is_exactly_integrable(psi, theta, v, dt):
    s = AircraftState(x=1e4, y=2e4, z=5e3, v=v, theta=theta, psi=psi)
    twice = apply_command_and_step(apply_command_and_step(s, 0, dt), 0, dt)
    once = apply_command_and_step(s, 0, 2 * dt)
    for a, b in zip(twice.position, once.position):
        assert a == pytest.approx(b, rel=1e-9, abs=1e-9)


@given(cmds=st.lists(st.integers(0, 9), min_size=1, max_size=60), psi=headings,
       v=speeds, theta=pitches)
@settings(max_examples=150)
def test_state_stays_finite_and_in_range(cmds, psi, v, theta):
    s = AircraftState(x=5e4, y=5e4, z=8e3, v=v, theta=theta, psi=psi)
    for c in cmds:
        s = apply_command_and_step(s, c, 1.0, notch_bearing=0.7)
        assert all(math.isfinite(q) for q in (s.x, s.y, s.z, s.v, s.theta, s.phi, s.psi))
        assert CFG.v_min <= s.v <= CFG.v_max
        assert -math.pi / 2 <= s.theta <= math.pi / 2
        assert -math.pi < s.psi <= math.pi and -math.pi < s.phi <= math.pi
        assert s.n_m == 4


@given(plan=st.lists(st.tuples(st.sampled_from(["fire0", "fire1", "step", "check", "kill1"])),
                     min_size=1, max_size=40))
@settings(max_examples=100)
def test_no_resurrection_and_rail_limit(plan):
    bf = duel(blue=aircraft(0, 0, 50_000.0, 50_000.0), red=aircraft(1, 1, 60_000.0, 50_000.0, psi=math.pi))
    launched = {0: 0, 1: 0}
    for (op,) in plan:
        dead = [not a.alive for a in bf.aircraft]
        spent = [not m.active for m in bf.missiles]
        if op.startswith("fire"):
            k = int(op[-1])
            if bf.aircraft[k].alive:
                before = len(bf.missiles)
                bf = spawn_missile(bf, k, 1 - k)
                launched[k] += len(bf.missiles) - before
        elif op == "step":
            bf = step_missiles(bf, 1.0)
        elif op == "check":
            bf, _ = check_outcomes(bf)
        else:
            bf.aircraft[1] = replace(bf.aircraft[1], alive=False)
        assert all(not a.alive for a, d in zip(bf.aircraft, dead) if d)
        assert all(not m.active for m, s in zip(bf.missiles, spent) if s)
        assert all(n <= 4 for n in launched.values())
        assert all(a.n_m == 4 - launched[a.uid] for a in bf.aircraft)
