"""Slot-stepped network simulator tying together mobility, traffic, attacks, trust and consensus.

A :class:`World` is one episode. Each call to :meth:`World.step` runs one
slot in this order:

1. compromise attack targets when the trigger slot is reached
2. move nodes (unless static) and rebuild the topology from current trust
3. admit demands born this slot; hand back demands stuck at isolated nodes
4. every node walks its queue head to tail and asks the routing policy for
   a next hop per demand; compromised relays may drop or misroute
5. deliver arrivals, write behavior reports, run one consensus round, fold
   committed reports into trust and flag nodes below the threshold

The routing policy is any callable ``policy(world, node, demand)`` that
returns a neighbor id from ``world.snapshot.gamma[node]`` or ``None`` to hold.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .adversary import AttackConfig, Decision, importance_scores, malicious_forward_decision, select_attack_targets
from .channel import ChannelParams, EnergyParams, link_rate, mobility_energy, rx_energy, tx_energy
from .consensus.ledger import TpbftLedger
from .consensus.messages import KeyRing, Transaction
from .errors import InvariantBreach, NoConsensusReachable, QueueFull
from .geometry import NodeState, SlotConfig, TopologySnapshot, build_topology, place_nodes, step_mobility
from .rng import Streams
from .traffic import (FORWARD, HOLD, PENALTY, Demand, FifoQueue, FlowEvent, HopRecord, hop_delay,
                      transmission_delay, update_queue_length)
from .trust import BehaviorReport, Delivery, PathCheck, TrustTable, WeightScheme

log = logging.getLogger(__name__)

Policy = Callable[["World", int, Demand], "int | None"]


@dataclass
class WorldConfig:
    n_nodes: int = 20
    n_demands: int = 10
    arrival_window: int = 1
    size_range: tuple[float, float] = (4e5, 6e5)
    slot: SlotConfig = field(default_factory=SlotConfig)
    channel: ChannelParams = field(default_factory=ChannelParams)
    energy: EnergyParams = field(default_factory=EnergyParams)
    c_max: int = 50
    t_one_max: float = 0.5
    attack: AttackConfig = field(default_factory=AttackConfig)
    btmm: bool = True
    thr: float = 0.8
    scheme: WeightScheme = WeightScheme.ADAPTIVE
    psi0_cap: float = 0.9
    printed_denominator: bool = False
    consensus_n: int = 2
    rotation_period: int = 5
    consensus_drop_prob: float = 0.0
    static: bool = False
    positions: Sequence[Sequence[float]] | None = None
    demands: Sequence[tuple[int, int, float, int]] | None = None
    reinject: bool = True

    def __post_init__(self):
        if self.n_nodes < 2:
            raise ValueError("need at least two nodes")
        if self.n_demands < 0 or self.arrival_window < 1:
            raise ValueError("n_demands must be >= 0 and arrival_window >= 1")
        lo, hi = self.size_range
        if not 0 <= lo <= hi:
            raise ValueError("size_range must satisfy 0 <= lo <= hi")
        if not 0.0 < self.thr <= 1.0:
            raise ValueError("thr must lie in (0, 1]")
        if self.t_one_max <= 0 or self.c_max < 1:
            raise ValueError("t_one_max and c_max must be positive")
        if self.positions is not None and len(self.positions) != self.n_nodes:
            raise ValueError("positions must list one point per node")


@dataclass
class SlotLog:
    slot: int
    hops: list[HopRecord] = field(default_factory=list)
    events: list[FlowEvent] = field(default_factory=list)
    queue_check: list[tuple[int, int, int, int, int]] = field(default_factory=list)  # node, prev, rx, tx, now
    reward: float = 0.0
    newly_flagged: set[int] = field(default_factory=set)
    outcomes: list["Outcome"] = field(default_factory=list)


@dataclass
class Outcome:
    """What happened to one routing decision; consumed by the learner."""

    node: int
    demand: int
    chosen: int | None
    kind: str  # forward | hold | drop
    hop_cost: float  # clipped delay charged to this decision
    terminal: bool


def slot_reward(hops: Sequence[HopRecord], t_one_max: float) -> float:
    total = 0.0
    for h in hops:
        total += min(h.delay, t_one_max)
    return -10.0 * total


class World:
    def __init__(self, cfg: WorldConfig, seed: int, episode: int = 0):
        self.cfg = cfg
        self.seed = seed
        self.episode = episode
        self.streams = Streams(seed)
        self.slot = 0
        self.hop_seq = 0
        self.logs: list[SlotLog] = []
        self.episode_reward = 0.0
        self.settled = False
        self.compromised: set[int] = set()
        self._place()
        self.queues = {i: FifoQueue(cfg.c_max) for i in range(cfg.n_nodes)}
        self.energy_prev = np.zeros(cfg.n_nodes)
        self.energy_slot = np.zeros(cfg.n_nodes)
        self.energy_total = 0.0
        self.trust = TrustTable(cfg.n_nodes, cfg.thr, cfg.scheme, self._rng("trust-random"),
                                cfg.psi0_cap, cfg.printed_denominator)
        self.ledger: TpbftLedger | None = None
        self.outbox: dict[int, list[BehaviorReport]] = {}
        self.keys = KeyRing(seed)
        if cfg.btmm:
            f_rot = min(cfg.attack.f, cfg.consensus_n) if cfg.attack.f > 0 else 1
            self.ledger = TpbftLedger(self.trust.values(), n=cfg.consensus_n, M=cfg.rotation_period, f=max(f_rot, 1),
                                      keys=self.keys, rng=self._rng("consensus"),
                                      drop_prob=cfg.consensus_drop_prob)
        self.demands: dict[int, Demand] = {}
        self._births: dict[int, list[Demand]] = {}
        self.snapshot = self._topology()
        if cfg.attack.trigger_slot == 0:
            self._compromise()
        self._make_demands()

    # setup -----------------------------------------------------------------

    def _rng(self, *names) -> np.random.Generator:
        return self.streams.get(*names, "episode", self.episode)

    def _place(self) -> None:
        cfg = self.cfg
        if cfg.positions is not None:
            self.states = [NodeState(id=i, position=np.asarray(p, dtype=float), velocity=np.zeros(3))
                           for i, p in enumerate(cfg.positions)]
        else:
            self.states = place_nodes(cfg.n_nodes, cfg.slot, self._rng("placement"))

    def _make_demands(self) -> None:
        cfg = self.cfg
        specs = cfg.demands
        if specs is None:
            rng = self._rng("demands")
            pool = [i for i in range(cfg.n_nodes) if i not in self.compromised]
            if len(pool) < 2:
                pool = list(range(cfg.n_nodes))
            specs = []
            for _ in range(cfg.n_demands):
                s, d = rng.choice(pool, size=2, replace=False)
                size = float(rng.uniform(*cfg.size_range))
                birth = int(rng.integers(0, cfg.arrival_window))
                specs.append((int(s), int(d), size, birth))
        for k, (s, d, size, birth) in enumerate(specs):
            dem = Demand(id=k, source=int(s), destination=int(d), size=float(size), birth_slot=int(birth))
            self.demands[k] = dem
            self._births.setdefault(dem.birth_slot, []).append(dem)

    def _compromise(self) -> None:
        scores = importance_scores(self.snapshot)
        self.compromised = select_attack_targets(scores, self.cfg.attack.f)
        log.debug("episode %s: compromised %s", self.episode, sorted(self.compromised))

    def _topology(self) -> TopologySnapshot:
        flagged = self.trust.flagged() if self.cfg.btmm else set()
        for s in self.states:
            s.is_malicious = s.id in flagged
            s.is_isolated = s.id in flagged
            s.queue = self.queues.get(s.id) if hasattr(self, "queues") else None
        trust = self.trust.values() if self.cfg.btmm else None
        snap = build_topology(self.states, trust, self.cfg.slot, lambda d: link_rate(d, self.cfg.channel),
                              self.cfg.thr, self.slot)
        self._components(snap)
        return snap

    def _components(self, snap: TopologySnapshot) -> None:
        """Connected components of the control plane.

        Consensus traffic needs radio range only (distance within ``d_max``),
        relayed over any number of non-flagged nodes; the ``q``-link limit
        applies to the data plane.
        """
        excluded = {s.id for s in snap.states if s.excluded}
        within = snap.dist <= self.cfg.slot.d_max
        comp: dict[int, int] = {}
        for root in range(snap.n):
            if root in comp or root in excluded:
                continue
            comp[root] = root
            todo = deque([root])
            while todo:
                u = todo.popleft()
                for v in np.flatnonzero(within[u]):
                    v = int(v)
                    if v not in comp and v not in excluded:
                        comp[v] = root
                        todo.append(v)
        self.component = comp

    def reachable(self, a: int, b: int) -> bool:
        ca = self.component.get(a)
        return ca is not None and ca == self.component.get(b)

    # helpers ---------------------------------------------------------------

    @property
    def flagged(self) -> set[int]:
        return self.trust.flagged() if self.cfg.btmm else set()

    @property
    def horizon(self) -> int:
        return self.cfg.slot.horizon

    @property
    def done(self) -> bool:
        return self.slot >= self.horizon

    def queue_length(self, i: int) -> int:
        return len(self.queues[i])

    def _hop(self, dem: Demand, frm: int, to: int, qd: float, txd: float, kind: str, followed: bool = True) -> HopRecord:
        delay, clipped = hop_delay(qd, txd, self.cfg.t_one_max)
        rec = HopRecord(frm=frm, to=to, slot=self.slot, queue_delay=qd, tx_delay=txd, clipped=clipped,
                        followed_specified_path=followed, kind=kind, seq=self.hop_seq)
        self.hop_seq += 1
        dem.add_hop(rec)
        return rec

    def penalty_hops(self, holder: int, dest: int) -> int:
        """Remaining hop count charged to an unfinished demand.

        Hop distance over all in-range pairs (trust ignored), at least one;
        a disconnected pair is charged ``n_nodes - 1``.
        """
        within = self.snapshot.dist <= self.cfg.slot.d_max
        seen = {holder: 0}
        todo = deque([holder])
        while todo:
            u = todo.popleft()
            if u == dest:
                return max(1, seen[u])
            for v in np.flatnonzero(within[u]):
                v = int(v)
                if v not in seen:
                    seen[v] = seen[u] + 1
                    todo.append(v)
        return self.cfg.n_nodes - 1

    def _penalize(self, dem: Demand, holder: int, log_: SlotLog) -> float:
        k = self.penalty_hops(holder, dem.destination)
        cost = 0.0
        for _ in range(k):
            rec = self._hop(dem, holder, holder, self.cfg.t_one_max, 0.0, PENALTY)
            log_.hops.append(rec)
            cost += min(rec.delay, self.cfg.t_one_max)
        return cost

    def _drop(self, dem: Demand, holder: int, log_: SlotLog) -> float:
        dem.dropped = True
        dem.holder = holder
        return self._penalize(dem, holder, log_)

    # slot ------------------------------------------------------------------

    def step(self, policy: Policy) -> SlotLog:
        if self.done:
            raise RuntimeError("episode finished")
        cfg = self.cfg
        log_ = SlotLog(slot=self.slot)
        if self.slot > 0 and self.slot == cfg.attack.trigger_slot:
            self._compromise()
        if self.slot > 0:
            if not cfg.static:
                self.states = step_mobility(self.states, cfg.slot, self._rng("mobility"))
            self.snapshot = self._topology()
        snap = self.snapshot
        flagged = self.flagged
        before = {i: len(q) for i, q in self.queues.items()}
        ins = {i: 0 for i in self.queues}
        outs = {i: 0 for i in self.queues}

        # mobility energy is the per-slot baseline
        self.energy_slot = np.zeros(cfg.n_nodes)
        v = 0.0 if cfg.static else cfg.slot.speed
        for s in self.states:
            dz = 0.0 if cfg.static else float(s.velocity[2]) * cfg.slot.tau
            self.energy_slot[s.id] = mobility_energy(v, dz, cfg.slot.tau, cfg.energy)

        for dem in self._births.get(self.slot, []):
            try:
                self.queues[dem.source].enqueue(dem.id)
                dem.holder = dem.source
                ins[dem.source] += 1
            except QueueFull:
                self._drop(dem, dem.source, log_)

        # demands stranded at isolated holders go back to the last holder
        for i in sorted(flagged):
            for rid in list(self.queues[i]):
                dem = self.demands[rid]
                self.queues[i].remove(rid)
                outs[i] += 1
                back = dem.prev_holder
                if cfg.reinject and back is not None and back not in flagged:
                    try:
                        self.queues[back].enqueue(rid)
                        ins[back] += 1
                        dem.holder, dem.prev_holder = back, None
                        continue
                    except QueueFull:
                        pass
                self._drop(dem, i, log_)

        link_load: dict[tuple[int, int], float] = {}
        arrivals: list[tuple[Demand, int, int, bool]] = []  # demand, from, to, followed
        reports: list[BehaviorReport] = []
        budget = cfg.energy.budget
        for i in range(cfg.n_nodes):
            if i in flagged:
                continue
            sent_time = 0.0
            for rid in list(self.queues[i]):
                dem = self.demands[rid]
                chosen = policy(self, i, dem)
                if chosen is not None and chosen not in snap.neighbors(i):
                    raise ValueError(f"policy chose {chosen}, not a neighbor of {i}")
                target, followed = chosen, True
                relay = dem.prev_holder is not None
                if target is not None and i in self.compromised and relay:
                    decision = malicious_forward_decision(cfg.attack, self._rng("attack", i))
                    if decision is Decision.DROP:
                        self.queues[i].remove(rid)
                        outs[i] += 1
                        cost = self._drop(dem, i, log_)
                        log_.outcomes.append(Outcome(i, rid, chosen, "drop", cost, True))
                        if cfg.btmm:
                            reports.append(BehaviorReport(dem.prev_holder, i, self.slot, Delivery(1, 0)))
                        continue
                    if decision is Decision.WRONG_PATH:
                        others = [k for k in snap.neighbors(i) if k != chosen]
                        if others:
                            rng = self._rng("attack", i)
                            target, followed = others[int(rng.integers(0, len(others)))], False
                if target is not None:
                    rate = snap.rates[(i, target)]
                    load = link_load.get((i, target), 0.0) + link_load.get((target, i), 0.0)
                    d = float(snap.dist[i, target])
                    e_tx = tx_energy(dem.size, d, cfg.energy)
                    e_rx = rx_energy(dem.size, cfg.energy)
                    fits = load + dem.size <= cfg.slot.tau * rate
                    powered = (self.energy_slot[i] + e_tx <= budget) and (self.energy_slot[target] + e_rx <= budget)
                    if not (fits and powered):
                        target = None  # deferred: waits like a hold
                if target is None:
                    rec = self._hop(dem, i, i, cfg.slot.tau, 0.0, HOLD)
                    log_.hops.append(rec)
                    log_.events.append(FlowEvent(self.slot, rid, i, i))
                    log_.outcomes.append(Outcome(i, rid, chosen, "hold", min(rec.delay, cfg.t_one_max), False))
                    continue
                txd = transmission_delay(dem.size, rate)
                rec = self._hop(dem, i, target, sent_time, txd, FORWARD, followed)
                sent_time += txd
                log_.hops.append(rec)
                log_.events.append(FlowEvent(self.slot, rid, i, target))
                link_load[(i, target)] = link_load.get((i, target), 0.0) + dem.size
                self.energy_slot[i] += e_tx
                self.energy_slot[target] += e_rx
                self.queues[i].remove(rid)
                outs[i] += 1
                arrivals.append((dem, i, target, followed))
                log_.outcomes.append(Outcome(i, rid, chosen, "forward", min(rec.delay, cfg.t_one_max),
                                             target == dem.destination))
                if cfg.btmm and relay:
                    reports.append(BehaviorReport(target, i, self.slot, Delivery(1, 1)))
                    reports.append(BehaviorReport(target, i, self.slot, PathCheck(1, 0 if followed else 1)))

        for dem, frm, to, _ in arrivals:
            if to == dem.destination:
                dem.prev_holder, dem.holder = frm, to
                dem.delivered = True
                continue
            try:
                self.queues[to].enqueue(dem.id)
                ins[to] += 1
                dem.prev_holder, dem.holder = frm, to
            except QueueFull:
                # overflow at the receiver is not the sender's misbehavior: no report
                cost = self._drop(dem, frm, log_)
                for o in log_.outcomes:
                    if o.demand == dem.id and o.kind == "forward":
                        o.hop_cost += cost
                        o.terminal = True

        for i in range(cfg.n_nodes):
            now = update_queue_length(before[i], ins[i], outs[i], cfg.c_max)
            if now != len(self.queues[i]):
                raise InvariantBreach(f"node {i}: identity gives {now}, queue holds {len(self.queues[i])}")
            log_.queue_check.append((i, before[i], ins[i], outs[i], now))

        if cfg.btmm:
            self._consensus(reports, log_)

        self.energy_total += float(self.energy_slot.sum())
        self.energy_prev = self.energy_slot.copy()
        log_.reward = slot_reward(log_.hops, cfg.t_one_max)
        self.episode_reward += log_.reward
        self.logs.append(log_)
        self.slot += 1
        if self.done:
            self._settle()
        return log_

    def _consensus(self, reports: list[BehaviorReport], log_: SlotLog) -> None:
        ledger = self.ledger
        for rep in reports:
            self.outbox.setdefault(rep.reporter, []).append(rep)
        flagged = self.flagged
        positions = [s.position for s in self.states]
        for reporter in sorted(self.outbox):
            reps = self.outbox[reporter]
            if not reps:
                continue
            tx = Transaction.create(f"e{self.episode}-s{self.slot}-n{reporter}", reps, reporter, self.keys)
            try:
                ledger.submit_transaction(tx, reporter, positions, self.reachable, flagged)
                self.outbox[reporter] = []
            except NoConsensusReachable:
                pass  # retried next slot
        ledger.run_round(self.slot, self.reachable, flagged)
        ledger.apply_committed_reports(self.trust)
        log_.newly_flagged = self.trust.step(self.slot)
        if ledger.rotation_due():
            ledger.rotate_membership(self.trust.values(), self.cfg.thr, self.slot, self.reachable,
                                     self.flagged, self.flagged)

    def _settle(self) -> None:
        """Charge unfinished demands at the horizon as a final reward term."""
        log_ = SlotLog(slot=self.slot)
        for rid in sorted(self.demands):
            dem = self.demands[rid]
            if dem.finished or dem.birth_slot >= self.horizon:
                continue
            holder = dem.holder if dem.holder is not None else dem.source
            self._penalize(dem, holder, log_)
        log_.reward = slot_reward(log_.hops, self.cfg.t_one_max)
        self.episode_reward += log_.reward
        self.logs.append(log_)
        self.settled = True

    def run(self, policy: Policy) -> float:
        while not self.done:
            self.step(policy)
        return self.episode_reward

    # metrics ---------------------------------------------------------------

    def demand_delay(self, dem: Demand) -> float:
        return sum(h.delay for h in dem.path)

    def detection_steps(self) -> dict[int, int]:
        """Trust step at which each compromised node was flagged (-1 if never)."""
        out = {}
        for i in sorted(self.compromised):
            rec = self.trust[i]
            out[i] = rec.flag_slot + 1 if rec.flagged and rec.flag_slot is not None else -1
        return out

    def summary(self) -> dict:
        cfg = self.cfg
        dems = [d for d in self.demands.values() if d.birth_slot < self.horizon]
        delivered = [d for d in dems if d.delivered]
        delays = [self.demand_delay(d) for d in dems]
        sim_time = max(self.slot, 1) * cfg.slot.tau
        qlen = [c[4] for lg in self.logs for c in lg.queue_check]
        return {
            "episode_reward": self.episode_reward,
            "mean_delay": float(np.mean(delays)) if delays else 0.0,
            "delivered": len(delivered),
            "demands": len(dems),
            "throughput": sum(d.size for d in delivered) / sim_time,
            "mean_queue": float(np.mean(qlen)) if qlen else 0.0,
            "energy": self.energy_total,
            "commits": self.ledger.commits if self.ledger else 0,
            "flagged": len(self.flagged),
            "detection": self.detection_steps(),
            "consensus_messages": self.ledger.bus.sent if self.ledger else 0,
        }
