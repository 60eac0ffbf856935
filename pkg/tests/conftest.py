import numpy as np
import pytest

from acemappo.airsim import AircraftState, Battlefield
from acemappo.config import AirsimConfig, EnvConfig
from acemappo.env import CombatEnv


def aircraft(uid, team, x, y, z=3000.0, v=180.0, psi=0.0, **kw):
    return AircraftState(x=x, y=y, z=z, v=v, psi=psi, team=team, uid=uid, **kw)


def duel(blue=None, red=None, extent_ns=200_000.0, extent_ew=100_000.0):
    """1v1 battlefield, blue facing north at the middle, red 30 km ahead facing south."""
    blue = blue or aircraft(0, 0, 50_000.0, 50_000.0)
    red = red or aircraft(1, 1, 80_000.0, 50_000.0, psi=np.pi)
    return Battlefield(extent_ns, extent_ew, [blue, red])


@pytest.fixture
def env_1v1():
    return CombatEnv(EnvConfig(team_size=1), AirsimConfig())


@pytest.fixture
def env_2v2():
    return CombatEnv()


def pytest_terminal_summary(terminalreporter):
    from .test_acceptance import RESULTS
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        terminalreporter.write_line(f"criterion {n:2d}: {RESULTS[n]}")
