import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from acemappo.airsim import AircraftState, Battlefield, MissileState
from acemappo.config import AirsimConfig, ConfigError, EnvConfig
from acemappo.env import (B_M, BLUE_WIN, D_E, DH_E, DRAW, OBS_DIM, RED_WIN, THETA_E, THREAT_SLICE,
                          CombatEnv, EnvError, RewardWeights, advantage_reward, build_observation,
                          compute_ata, compute_reward, reset, step, threat_sentinel)

from .conftest import aircraft, duel

W = RewardWeights()


def test_reset_defaults(env_2v2):
    bf, obs = env_2v2.reset(0)
    assert len(bf.aircraft) == 4 and len(obs) == 4
    for a in bf.aircraft:
        assert (a.z, a.v, a.n_m, a.alive) == (3000.0, 180.0, 4, True)
    blue, red = bf.team(0), bf.team(1)
    assert all(a.x < 0.5 * bf.extent_ns for a in blue)
    assert all(a.x > 0.5 * bf.extent_ns for a in red)


def test_reset_is_deterministic(env_2v2):
    a, oa = env_2v2.reset(123)
    b, ob = env_2v2.reset(123)
    assert a == b
    assert all(np.array_equal(oa[k].raw, ob[k].raw) for k in oa)


def test_different_seeds_give_different_offsets(env_2v2):
    ys = {tuple(a.y for a in env_2v2.reset(s)[0].team(0)) for s in range(100)}
    assert len(ys) == 100


def test_invalid_team_size_rejected():
    with pytest.raises(ConfigError):
        reset(EnvConfig(team_size=0), AirsimConfig(), 0)


def test_spawn_is_point_mirrored(env_2v2):
    bf, obs = env_2v2.reset(7)
    n = 2
    for i in range(n):
        np.testing.assert_allclose(obs[i].raw, obs[n + i].raw, atol=1e-9)


def test_observation_has_19_fields_and_sentinel(env_1v1):
    bf, obs = env_1v1.reset(0)
    o = obs[0]
    assert len(o) == OBS_DIM and o.norm.shape == (OBS_DIM,)
    assert o.b_m == 0
    np.testing.assert_array_equal(o.raw[THREAT_SLICE], threat_sentinel(EnvConfig(), AirsimConfig()))
    np.testing.assert_allclose(o.norm[THREAT_SLICE], [1, 1, 1, 1, 0])


def test_enemy_dead_ahead_co_altitude():
    o = build_observation(duel(), 0)
    assert o.raw[THETA_E] == 0.0 and o.raw[DH_E] == 0.0
    assert o.raw[D_E] == pytest.approx(30_000.0)


def test_nearest_enemy_selected():
    me = aircraft(0, 0, 50_000.0, 50_000.0)
    far = aircraft(1, 1, 100_000.0, 50_000.0)
    near = aircraft(2, 1, 50_000.0, 60_000.0)
    o = build_observation(Battlefield(2e5, 1e5, [me, far, near]), 0)
    assert o.raw[D_E] == pytest.approx(10_000.0)
    assert o.raw[THETA_E] == pytest.approx(math.pi / 2)   # due east, right of a north heading


@given(pts=st.lists(st.tuples(st.floats(0, 2e5), st.floats(0, 1e5), st.floats(100, 2e4)),
                    min_size=1, max_size=5))
@settings(max_examples=60)
def test_nearest_enemy_matches_brute_force(pts):
    me = aircraft(0, 0, 1e5, 5e4)
    enemies = [aircraft(k + 1, 1, x, y, z=z) for k, (x, y, z) in enumerate(pts)]
    o = build_observation(Battlefield(2e5, 1e5, [me, *enemies]), 0)
    brute = min(math.dist(me.position, e.position) for e in enemies)
    assert o.raw[D_E] == pytest.approx(brute, rel=1e-12, abs=1e-9)


def test_threat_block_reports_inbound_missile():
    bf = duel()
    bf.missiles.append(MissileState((60_000.0, 50_000.0, 3000.0), (-1.0, 0.0, 0.0), 1000.0, 0, 1))
    o = build_observation(bf, 0)
    assert o.raw[B_M] == 1
    assert o.raw[THREAT_SLICE][0] == pytest.approx(10_000.0)
    assert o.raw[THREAT_SLICE][2] == pytest.approx(1180.0)   # approach speed: missile + own
    # a missile aimed at someone else is not a threat
    assert build_observation(bf, 1).raw[B_M] == 0


def test_dead_agent_observation_rejected():
    bf = duel(blue=aircraft(0, 0, 5e4, 5e4, alive=False))
    with pytest.raises(EnvError):
        build_observation(bf, 0)


def test_global_state_dimension(env_2v2, env_1v1):
    for env, dim in ((env_2v2, 47), (env_1v1, 24)):
        bf, obs = env.reset(0)
        s = env.global_state(bf, 0, obs)
        assert s.shape == (dim,) == (env.state_dim,)
        np.testing.assert_array_equal(s[:OBS_DIM], obs[0].norm)


# -- ATA ----------------------------------------------------------------------

def test_ata_examples():
    me = aircraft(0, 0, 5e4, 5e4, psi=0.0)
    assert compute_ata(me, aircraft(1, 1, 6e4, 5e4)) == pytest.approx(0.0, abs=1e-12)
    assert compute_ata(me, aircraft(1, 1, 4e4, 5e4)) == pytest.approx(math.pi)
    assert compute_ata(me, aircraft(1, 1, 5e4, 6e4)) == pytest.approx(math.pi / 2)


def test_ata_rejects_zero_los():
    me = aircraft(0, 0, 5e4, 5e4)
    with pytest.raises(EnvError):
        compute_ata(me, replace(me, team=1, uid=1))


@given(psi=st.floats(-math.pi, math.pi), theta=st.floats(-1.0, 1.0),
       ex=st.floats(-5e4, 5e4), ey=st.floats(-5e4, 5e4), ez=st.floats(-5e3, 5e3),
       rot=st.floats(-math.pi, math.pi))
def test_ata_rotation_invariant(psi, theta, ex, ey, ez, rot):
    if math.hypot(ex, ey, ez) < 1.0:
        return
    own = AircraftState(0.0, 0.0, 5000.0, 200.0, theta=theta, psi=psi)
    enemy = AircraftState(ex, ey, 5000.0 + ez, 200.0, team=1)
    c, s = math.cos(rot), math.sin(rot)
    own_r = replace(own, psi=psi + rot)
    enemy_r = replace(enemy, x=c * ex - s * ey, y=s * ex + c * ey)
    assert compute_ata(own_r, enemy_r) == pytest.approx(compute_ata(own, enemy), abs=1e-9)


# -- reward -------------------------------------------------------------------

def test_reward_nose_on_point_blank():
    bf = duel(red=aircraft(1, 1, 50_001.0, 50_000.0, psi=math.pi))
    r = compute_reward(bf, None, bf, 0, W)
    assert r.result == 0.0 and r.threat == 0.0
    assert r.total == pytest.approx(0.4, abs=1e-5)


def test_reward_terminal_victory_facing_away():
    bf = duel(red=aircraft(1, 1, 40_000.0, 50_000.0, alive=False))
    r = compute_reward(bf, None, bf, 0, W)
    assert (r.result, r.advantage, r.threat) == (1000.0, 0.0, 0.0)
    assert r.total == pytest.approx(300.0)
    # the losing side sees the mirror result
    loser = compute_reward(bf, None, bf, 1, W)
    assert loser.result == -1000.0


def test_reward_threat_at_safe_distance():
    bf = duel(red=aircraft(1, 1, 40_000.0, 50_000.0))           # directly behind: ATA = pi
    bf.missiles.append(MissileState((50_000.0, 70_000.0, 3000.0), (0.0, -1.0, 0.0), 1000.0, 0, 1))
    r = compute_reward(bf, None, bf, 0, W)
    assert r.advantage == 0.0
    assert r.threat == pytest.approx(-math.exp(-1.0), abs=1e-12)
    assert r.total == pytest.approx(-0.11036, abs=1e-5)
    assert r.total == pytest.approx(0.3 * -math.exp(-1.0), abs=1e-12)


@given(ata=st.floats(0, math.pi), d1=st.floats(0, 3e5), d2=st.floats(0, 3e5))
def test_advantage_monotone_in_distance(ata, d1, d2):
    if ata == math.pi or abs(d1 - d2) < 1.0:
        return
    lo, hi = sorted((d1, d2))
    assert advantage_reward(ata, lo, 1e5) > advantage_reward(ata, hi, 1e5)


@given(d=st.floats(0, 3e5), a1=st.floats(0, math.pi), a2=st.floats(0, math.pi))
def test_advantage_monotone_in_angle(d, a1, a2):
    if abs(a1 - a2) < 1e-6:
        return
    lo, hi = sorted((a1, a2))
    assert advantage_reward(lo, d, 1e5) > advantage_reward(hi, d, 1e5)
    assert 0.0 <= advantage_reward(hi, d, 1e5) <= 1.0


# -- step ---------------------------------------------------------------------

def _endgame(blue_alive, red_alive, step_count):
    blue = [aircraft(i, 0, 5e4, 4e4 + 1e4 * i, alive=a) for i, a in enumerate(blue_alive)]
    red = [aircraft(2 + i, 1, 1.5e5, 4e4 + 1e4 * i, psi=math.pi, alive=a)
           for i, a in enumerate(red_alive)]
    return Battlefield(2e5, 1e5, blue + red, step_count=step_count)


def test_both_red_killed_is_blue_win():
    bf = _endgame([True, True], [True, True], 10)
    for j in (2, 3):
        pos = bf.aircraft[j].position
        bf.missiles.append(MissileState(pos, (1.0, 0.0, 0.0), 1000.0, j, 0))
    res = step(bf, [0, 0, 0, 0])
    assert res.terminal and res.outcome == BLUE_WIN
    assert {e.aircraft for e in res.events} == {2, 3}


@pytest.mark.parametrize("blue,red,outcome", [
    ([True, True], [True, False], BLUE_WIN),
    ([True, False], [True, False], DRAW),
    ([False, True], [True, True], RED_WIN),
])
def test_timeout_counts_survivors(blue, red, outcome):
    bf = _endgame(blue, red, 899)
    res = step(bf, [0] * 4)
    assert res.terminal and res.outcome == outcome
    assert res.battlefield.step_count == 900


def test_terminal_result_shared_by_teammates():
    bf = _endgame([True, True], [True, False], 899)
    res = step(bf, [0] * 4)
    assert res.rewards[0].result == res.rewards[1].result == 1000.0
    assert res.rewards[2].result == -1000.0


def test_dead_agent_actions_ignored():
    bf = _endgame([True, False], [True, True], 0)
    res = step(bf, {0: 0, 1: 9, 2: 0, 3: 0})
    assert res.battlefield.missiles == [] and 1 not in res.rewards


@pytest.mark.parametrize("joint", [[0, 0, 0], [0, 0, 0, 10], [0, 0, 0, -1], [0, 0, 0, None],
                                   {0: 0, 1: 0, 2: 0}, [0, 0, 0, 1.5]])
def test_malformed_joint_action_rejected(joint):
    with pytest.raises(EnvError):
        step(_endgame([True, True], [True, True], 0), joint)


def test_step_after_termination_rejected():
    with pytest.raises(EnvError):
        step(_endgame([True, True], [False, False], 5), [0] * 4)


def test_fire_launches_at_nearest_enemy(env_1v1):
    bf, _ = env_1v1.reset(0)
    res = env_1v1.step(bf, [9, 0])
    assert len(res.battlefield.missiles) == 1
    assert res.battlefield.missiles[0].target_id == 1
    assert res.battlefield.aircraft[0].n_m == 3
    assert res.observations[1].b_m == 1


@given(seed=st.integers(0, 2**32 - 1))
@settings(max_examples=8, deadline=None)
def test_random_episode_reward_bounds(seed):
    env = CombatEnv(EnvConfig(team_size=2))
    rng = np.random.default_rng(seed)
    bf, _ = env.reset(seed)
    while True:
        res = env.step(bf, {a.uid: int(rng.integers(10)) for a in bf.aircraft if a.alive})
        for r in res.rewards.values():
            assert 0.0 <= r.advantage <= 1.0 and -1.0 <= r.threat <= 0.0
            bound = W.w2 + W.w3 + (W.w1 * 1000.0 if res.terminal else 0.0)
            assert abs(r.total) <= bound + 1e-12
            if not res.terminal:
                assert r.result == 0.0
        for o in res.observations.values():
            assert len(o) == OBS_DIM and np.all(np.isfinite(o.norm))
        bf = res.battlefield
        if res.terminal:
            break
    assert bf.step_count <= 900
