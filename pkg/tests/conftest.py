"""Shared fixtures: the six-node static ladder used by routing tests."""

import numpy as np
import pytest

from uavtrust.adversary import AttackConfig
from uavtrust.geometry import SlotConfig
from uavtrust.world import WorldConfig

LADDER_POSITIONS = [(0, 0, 130), (200, 0, 130), (400, 0, 130), (0, 200, 130), (200, 200, 130), (400, 200, 130)]
LADDER_DEMANDS = [(0, 2, 5e5, 0), (3, 5, 5e5, 0), (5, 0, 5e5, 0)]


def ladder_config(**overrides) -> WorldConfig:
    kw = dict(n_nodes=6, n_demands=3, slot=SlotConfig(d_max=300.0, q=3, horizon=6), attack=AttackConfig(f=0),
              btmm=False, static=True, positions=LADDER_POSITIONS, demands=LADDER_DEMANDS)
    kw.update(overrides)
    return WorldConfig(**kw)


@pytest.fixture
def ladder_cfg():
    return ladder_config()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
