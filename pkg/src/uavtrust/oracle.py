"""Shortest-delay routing on a fixed snapshot, used as audit baseline and as a non-learning policy."""

from __future__ import annotations

import math
from typing import Iterable

import networkx as nx

from .channel import EnergyParams, hover_power
from .errors import Unreachable
from .geometry import TopologySnapshot
from .traffic import Demand, transmission_delay


def energy_range(size: float, ep: EnergyParams, baseline: float = 0.0) -> float:
    """Longest hop (m) over which ``size`` bits fit into the per-slot energy budget.

    ``baseline`` is energy already spent in the slot (propulsion). Returns
    ``inf`` for empty demands and 0 when even a zero-length hop is too costly.
    """
    if size <= 0:
        return math.inf
    spare = (ep.budget - baseline) / size - ep.E_elec
    return math.sqrt(spare / ep.xi_fs) if spare > 0 else 0.0


def delay_graph(snapshot: TopologySnapshot, size: float, exclude: Iterable[int] = (),
                max_hop: float = math.inf) -> nx.Graph:
    """Undirected graph weighted by the transmission delay of ``size`` bits.

    Links longer than ``max_hop`` meters are left out.
    """
    exclude = set(exclude)
    g = nx.Graph()
    g.add_nodes_from(i for i in range(snapshot.n) if i not in exclude)
    for i, j in snapshot.edges():
        if i in exclude or j in exclude or snapshot.dist[i, j] > max_hop:
            continue
        g.add_edge(i, j, weight=transmission_delay(size, snapshot.rates[(i, j)]))
    return g


def oracle_shortest_delay(snapshot: TopologySnapshot, demand: Demand, exclude: Iterable[int] = (),
                          max_hop: float = math.inf) -> tuple[list[int], float]:
    """Minimum total transmission delay path assuming empty queues.

    Raises :class:`Unreachable` when the endpoints are disconnected once
    ``exclude`` (flagged or compromised nodes) and hops beyond ``max_hop``
    are removed.
    """
    g = delay_graph(snapshot, demand.size, exclude, max_hop)
    s, d = demand.source, demand.destination
    if s not in g or d not in g:
        raise Unreachable(f"endpoint of demand {demand.id} is excluded")
    try:
        cost, path = nx.single_source_dijkstra(g, s, d, weight="weight")
    except nx.NetworkXNoPath as exc:
        raise Unreachable(f"no path {s} -> {d}") from exc
    return list(path), float(cost)


class ShortestDelayPolicy:
    """Forward along the current shortest-delay path; avoid flagged nodes only.

    Hops the demand could not afford under the energy budget (with the
    propulsion baseline of a moving node) are skipped. Within that set the
    path choice does not depend on demand size, so next hops are cached per
    slot, destination and hop-length cutoff.
    """

    def __init__(self):
        self._slot = None
        self._cache: dict[tuple[int, float], dict[int, list[int]]] = {}

    def __call__(self, world, node: int, demand: Demand):
        snap = world.snapshot
        if self._slot != (id(world), world.slot):
            self._slot = (id(world), world.slot)
            self._cache = {}
        dst = demand.destination
        cfg = world.cfg
        speed = 0.0 if cfg.static else cfg.slot.speed
        ep = cfg.energy
        baseline = (hover_power(speed, ep) + ep.g * ep.M * speed) * cfg.slot.tau
        reach = energy_range(demand.size, ep, baseline)
        key = (dst, reach)
        paths = self._cache.get(key)
        if paths is None:
            g = delay_graph(snap, 1.0, world.flagged, reach)
            paths = nx.single_source_dijkstra_path(g, dst, weight="weight") if dst in g else {}
            self._cache[key] = paths
        p = paths.get(node)
        if p is None or len(p) < 2:
            return None
        return p[-2]
