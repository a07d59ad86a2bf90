import math

import pytest

from uavtrust.channel import EnergyParams, tx_energy
from uavtrust.errors import Unreachable
from uavtrust.geometry import SlotConfig
from uavtrust.adversary import AttackConfig
from uavtrust.oracle import ShortestDelayPolicy, energy_range, oracle_shortest_delay
from uavtrust.traffic import Demand
from uavtrust.world import World, WorldConfig

from conftest import ladder_config


def simple_paths(adj, s, d, seen=()):
    if s == d:
        yield [d]
        return
    for k in adj[s]:
        if k not in seen and k != s:
            for rest in simple_paths(adj, k, d, seen + (s,)):
                yield [s] + rest


def brute_force(snap, dem):
    best = (math.inf, None)
    for p in simple_paths(snap.gamma, dem.source, dem.destination):
        cost = sum(dem.size / snap.rates[(a, b)] for a, b in zip(p, p[1:]))
        best = min(best, (cost, p))
    return best


def test_ladder_matches_enumeration():
    w = World(ladder_config(), 0)
    for dem in w.demands.values():
        path, cost = oracle_shortest_delay(w.snapshot, dem)
        ref_cost, ref_path = brute_force(w.snapshot, dem)
        assert cost == pytest.approx(ref_cost, rel=1e-12)
        assert path == ref_path


def test_direct_link_preferred():
    pos = [(0, 0, 130), (100, 0, 130), (50, 80, 130)]
    cfg = WorldConfig(n_nodes=3, slot=SlotConfig(d_max=300.0, q=2), static=True, btmm=False,
                      attack=AttackConfig(f=0), positions=pos, demands=[(0, 1, 4e5, 0)])
    w = World(cfg, 0)
    path, _ = oracle_shortest_delay(w.snapshot, w.demands[0])
    assert path == [0, 1]


def test_isolated_destination():
    pos = [(0, 0, 130), (100, 0, 130), (1400, 1400, 130)]
    cfg = WorldConfig(n_nodes=3, slot=SlotConfig(d_max=300.0, q=2), static=True, btmm=False,
                      attack=AttackConfig(f=0), positions=pos, demands=[(0, 2, 4e5, 0)])
    w = World(cfg, 0)
    with pytest.raises(Unreachable):
        oracle_shortest_delay(w.snapshot, w.demands[0])
    with pytest.raises(Unreachable):
        oracle_shortest_delay(w.snapshot, Demand(9, 0, 1, 4e5), exclude={1})


def test_energy_range_is_budget_edge():
    ep = EnergyParams()
    r = energy_range(5e5, ep, 100.0)
    assert tx_energy(5e5, r, ep) + 100.0 == pytest.approx(ep.budget)
    assert energy_range(0.0, ep) == math.inf
    assert energy_range(1e9, ep) == 0.0


def test_policy_reaches_oracle_on_ladder():
    cfg = ladder_config()
    w = World(cfg, 0)
    expected = {d.id: oracle_shortest_delay(w.snapshot, d)[1] for d in w.demands.values()}
    w.run(ShortestDelayPolicy())
    for d in w.demands.values():
        assert d.delivered
        assert w.demand_delay(d) == pytest.approx(expected[d.id], rel=1e-12)
