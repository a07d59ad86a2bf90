"""Observations, action masks and the training/evaluation loop over a :class:`World`.

Observation layout for node ``i`` (``q`` neighbor slots, Γ order):

    own position (3), own queue length (1),
    per slot: position (3), queue length (1), energy used last slot (1), trust (1)

With a demand attached the vector is extended by the destination position
(3), the own distance to the destination (1) and per slot the neighbor's
distance to the destination (1) and an is-destination flag (1). Without the
extension several destinations would be indistinguishable to one network.
Absent neighbor slots are all zeros; every component is scaled into [0, 1].
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..errors import BufferTooSmall, Isolated
from ..rng import stream
from ..traffic import Demand
from ..world import World, WorldConfig
from .agent import Agent, AgentHyper, epsilon, select_action, train_step

log = logging.getLogger(__name__)


def obs_dim(q: int, with_destination: bool = True) -> int:
    return 4 + 6 * q + ((4 + 2 * q) if with_destination else 0)


def _scale_pos(p, lo, hi) -> np.ndarray:
    return (np.asarray(p, dtype=float) - lo) / (hi - lo)


def build_observation(world: World, i: int, demand: Demand | None = None) -> np.ndarray:
    cfg = world.cfg
    snap = world.snapshot
    if snap.states[i].excluded:
        raise Isolated(f"node {i} is isolated")
    q = cfg.slot.q
    lo, hi = cfg.slot.lower, cfg.slot.upper
    budget = cfg.energy.budget
    trust = world.trust.values() if cfg.btmm else {}
    out = np.zeros(obs_dim(q, demand is not None))
    out[0:3] = _scale_pos(snap.position(i), lo, hi)
    out[3] = world.queue_length(i) / cfg.c_max
    nbrs = snap.neighbors(i)
    for k, j in enumerate(nbrs[:q]):
        b = 4 + 6 * k
        out[b:b + 3] = _scale_pos(snap.position(j), lo, hi)
        out[b + 3] = world.queue_length(j) / cfg.c_max
        out[b + 4] = min(world.energy_prev[j] / budget, 1.0)
        out[b + 5] = trust.get(j, 1.0)
    if demand is not None:
        diag = float(np.linalg.norm(hi - lo))
        dest = demand.destination
        b = 4 + 6 * q
        out[b:b + 3] = _scale_pos(snap.position(dest), lo, hi)
        out[b + 3] = snap.dist[i, dest] / diag
        for k, j in enumerate(nbrs[:q]):
            c = b + 4 + 2 * k
            out[c] = snap.dist[j, dest] / diag
            out[c + 1] = 1.0 if j == dest else 0.0
    return out


def action_mask(world: World, i: int) -> np.ndarray:
    q = world.cfg.slot.q
    m = np.zeros(q + 1, dtype=bool)
    m[: min(len(world.snapshot.neighbors(i)), q)] = True
    m[q] = True  # hold
    return m


def action_to_target(world: World, i: int, a: int):
    nbrs = world.snapshot.neighbors(i)
    return nbrs[a] if a < len(nbrs) and a < world.cfg.slot.q else None


@dataclass
class EpisodeResult:
    episode: int
    reward: float
    summary: dict
    losses: list[float] = field(default_factory=list)
    world: World | None = None


class MarlRunner:
    """Per-node agents trained with demand-centric transitions.

    ``double`` selects the DDQN target (MADDQN) or the plain max target (MADQN).
    """

    def __init__(self, world_cfg: WorldConfig, hyper: AgentHyper, seed: int, double: bool = True):
        self.cfg = world_cfg
        self.hyper = hyper
        self.seed = seed
        self.double = double
        q = world_cfg.slot.q
        dim = obs_dim(q, True)
        self.agents: dict[int, Agent] = {}
        shared = None
        for i in range(world_cfg.n_nodes):
            if hyper.share_params and shared is not None:
                self.agents[i] = shared
                continue
            ag = Agent(i, dim, q + 1, hyper, stream(seed, "init", i))
            self.agents[i] = ag
            shared = ag
        self.eps_rng = {i: stream(seed, "epsilon", i) for i in range(world_cfg.n_nodes)}
        self.train_rng = stream(seed, "replay")

    def _store(self, agent_id: int, obs, action, reward, next_obs, next_mask, terminal, next_agent) -> None:
        self.agents[agent_id].buffer.add(obs, action, reward, next_obs, next_mask, terminal, next_agent)

    def run_episode(self, episode: int, eps: float, train: bool = True, keep_world: bool = False) -> EpisodeResult:
        world = World(self.cfg, self.seed, episode)
        pending: dict[int, tuple] = {}  # demand -> (agent, obs, action, reward)
        current: dict[tuple[int, int], tuple] = {}
        losses: list[float] = []
        q = self.cfg.slot.q
        zero_obs = np.zeros(obs_dim(q, True))
        zero_mask = np.zeros(q + 1, dtype=bool)

        def policy(w: World, node: int, dem: Demand):
            obs = build_observation(w, node, dem)
            mask = action_mask(w, node)
            if train and dem.id in pending:
                ag, o, a, r = pending.pop(dem.id)
                self._store(ag, o, a, r, obs, mask, False, node)
            a = select_action(self.agents[node].online, obs, mask, eps, self.eps_rng[node])
            current[(node, dem.id)] = (obs, a)
            return action_to_target(w, node, a)

        while not world.done:
            current.clear()
            slot_log = world.step(policy)
            if not train:
                continue
            for o in slot_log.outcomes:
                obs, a = current[(o.node, o.demand)]
                r = -10.0 * o.hop_cost
                if o.terminal:
                    self._store(o.node, obs, a, r, zero_obs, zero_mask, True, o.node)
                else:
                    pending[o.demand] = (o.node, obs, a, r)
            for dem_id in list(pending):
                if world.demands[dem_id].finished:
                    # finished outside the holder's own decision (drop at arrival or by reinjection)
                    ag, o_, a_, r_ = pending.pop(dem_id)
                    self._store(ag, o_, a_, r_, zero_obs, zero_mask, True, ag)
            seen = set()
            for i in sorted(self.agents):
                ag = self.agents[i]
                if id(ag) in seen:
                    continue
                seen.add(id(ag))
                try:
                    losses.append(train_step(ag, self.agents, self.train_rng, self.double))
                except BufferTooSmall:
                    pass
        if train:
            # horizon truncation: bootstrap from the holder's view on the last snapshot
            for dem_id, (ag, o_, a_, r_) in sorted(pending.items()):
                dem = world.demands[dem_id]
                holder = dem.holder
                if holder is None or world.snapshot.states[holder].excluded:
                    self._store(ag, o_, a_, r_, zero_obs, zero_mask, True, ag)
                else:
                    self._store(ag, o_, a_, r_, build_observation(world, holder, dem), action_mask(world, holder),
                                False, holder)
        return EpisodeResult(episode, world.episode_reward, world.summary(), losses, world if keep_world else None)

    def train(self, episodes: int, callback=None) -> list[EpisodeResult]:
        out = []
        for ep in range(episodes):
            res = self.run_episode(ep, epsilon(ep, episodes, self.hyper), train=True)
            out.append(res)
            if callback is not None:
                callback(res)
        return out

    def evaluate(self, episode: int = 0, keep_world: bool = True) -> EpisodeResult:
        return self.run_episode(episode, 0.0, train=False, keep_world=keep_world)
