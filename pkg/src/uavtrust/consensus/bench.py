"""Randomized fault schedules for consensus safety and liveness checks."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..rng import stream
from ..trust import BehaviorReport, Delivery
from .ledger import TpbftLedger
from .messages import GENESIS, Block, Commit, Envelope, KeyRing, PrePrepare, Prepare, Transaction
from .replica import PbftReplica


def _dummy_tx(tag: str, submitter: int, keys: KeyRing) -> Transaction:
    rep = BehaviorReport(reporter=submitter, subject=(submitter + 1) % 1000, slot=0, kind=Delivery(1, 1))
    return Transaction.create(tag, [rep], submitter, keys)


class ByzantineReplica:
    """Signs arbitrary protocol messages with its own key.

    It votes for every digest it has seen, toward random subsets of members,
    and as leader sends conflicting pre-prepares.
    """

    def __init__(self, node: int, members: tuple[int, ...], leader: int, keys: KeyRing, rng: np.random.Generator,
                 view: int = 0):
        self.node = node
        self.members = members
        self.leader = leader
        self.keys = keys
        self.rng = rng
        self.view = view
        self.seen: set[tuple[int, str]] = set()

    def _spray(self, msg) -> list[Envelope]:
        out = []
        for m in self.members:
            if m != self.node and self.rng.random() < 0.7:
                out.append(Envelope.seal(msg, self.node, m, self.keys))
        return out

    def equivocate(self, blocks: list[Block]) -> list[Envelope]:
        out = []
        for m in self.members:
            if m == self.node:
                continue
            k = int(self.rng.integers(0, len(blocks) + 1))
            if k < len(blocks):
                b = blocks[k]
                out.append(Envelope.seal(PrePrepare(self.view, b.seq, b.digest, b), self.node, m, self.keys))
        for b in blocks:
            self.seen.add((b.seq, b.digest))
        return out

    def handle(self, env: Envelope) -> list[Envelope]:
        msg = env.msg
        if hasattr(msg, "digest"):
            self.seen.add((msg.seq, msg.digest))
        out: list[Envelope] = []
        for seq, digest in sorted(self.seen):
            if self.rng.random() < 0.3:
                if self.node != self.leader:
                    out += self._spray(Prepare(self.view, seq, digest, self.node))
                out += self._spray(Commit(self.view, seq, digest, self.node))
        return out


@dataclass
class SafetyResult:
    seed: int
    committed: dict[int, dict[int, str]] = field(default_factory=dict)
    conflicts: list[int] = field(default_factory=list)
    deliveries: int = 0

    @property
    def safe(self) -> bool:
        return not self.conflicts


def safety_schedule(seed: int, n: int = 1, byzantine_leader: bool = True, drop_prob: float = 0.2,
                    seqs: int = 2, max_steps: int = 20_000) -> SafetyResult:
    """Run one randomized adversarial schedule and look for split commits.

    Up to ``n`` replicas are Byzantine (always including the leader when
    ``byzantine_leader``); delivery order is a random permutation with
    random loss and random retransmission bursts.
    """
    rng = stream(seed, "consensus-bench", "safety")
    keys = KeyRing(seed)
    members = tuple(range(3 * n + 1))
    leader = 0
    byz: set[int] = set()
    if byzantine_leader:
        byz.add(leader)
    others = [m for m in members if m != leader]
    while len(byz) < n:
        byz.add(int(rng.choice([m for m in others if m not in byz])))
    honest = {m: PbftReplica(node=m, members=members, leader=leader, n=n, keys=keys) for m in members if m not in byz}
    bad = {m: ByzantineReplica(m, members, leader, keys, stream(seed, "consensus-bench", "byz", m)) for m in byz}
    handlers = {**{m: r.handle for m, r in honest.items()}, **{m: r.handle for m, r in bad.items()}}

    pool: list[Envelope] = []
    prev = {0: GENESIS, 1: GENESIS}
    for seq in range(1, seqs + 1):
        if leader in bad:
            blocks = []
            for variant in (0, 1):
                tx = _dummy_tx(f"s{seed}-q{seq}-v{variant}", 1 + variant, keys)
                b = Block.build(seq, 0, [tx], leader, prev[variant])
                prev[variant] = b.digest
                blocks.append(b)
            pool += bad[leader].equivocate(blocks)
        else:
            tx = _dummy_tx(f"s{seed}-q{seq}", 1, keys)
            b = Block.build(seq, 0, [tx], leader, prev[0])
            prev[0] = b.digest
            pool += honest[leader].propose(b)

    result = SafetyResult(seed=seed)
    steps = 0
    while pool and steps < max_steps:
        steps += 1
        env = pool.pop(int(rng.integers(0, len(pool))))
        if rng.random() < drop_prob:
            continue
        result.deliveries += 1
        pool += handlers[env.dest](env)
        if rng.random() < 0.02:
            m = int(rng.choice(sorted(honest)))
            pool += honest[m].retransmit()

    for m, rep in honest.items():
        result.committed[m] = {s: b.digest for s, b in rep.committed.items()}
    for seq in range(1, seqs + 1):
        digests = {c[seq] for c in result.committed.values() if seq in c}
        if len(digests) > 1:
            result.conflicts.append(seq)
    return result


@dataclass
class LivenessResult:
    seed: int
    submitted: int
    committed: int
    max_latency: int
    crashed: tuple[int, ...]


def liveness_run(seed: int, n: int = 1, crashes: int = 1, drop_prob: float = 0.1, slots: int = 30,
                 submit_until: int = 15) -> LivenessResult:
    """Crash ``crashes`` non-leader members and measure commit latency in slots."""
    keys = KeyRing(seed)
    size = 3 * n + 1
    nodes = size + 3
    trust = {i: 1.0 for i in range(nodes)}
    ledger = TpbftLedger(trust, n=n, M=10**9, f=n, keys=keys, rng=stream(seed, "consensus-bench", "bus"),
                         drop_prob=drop_prob)
    rng = stream(seed, "consensus-bench", "crash")
    backups = [m for m in ledger.members if m != ledger.leader]
    ledger.crashed = {int(x) for x in rng.choice(backups, size=crashes, replace=False)} if crashes else set()
    submit_slot: dict[str, int] = {}
    commit_slot: dict[str, int] = {}
    for slot in range(slots):
        if slot < submit_until:
            origin = int(rng.integers(0, nodes))
            rep = BehaviorReport(reporter=origin, subject=(origin + 1) % nodes, slot=slot, kind=Delivery(1, 1))
            tx = Transaction.create(f"tx{slot}", [rep], origin, keys)
            ledger.submit_transaction(tx, origin)
            submit_slot[tx.id] = slot
        for block in ledger.run_round(slot):
            for tx in block.txs:
                commit_slot.setdefault(tx.id, slot)
    lat = [commit_slot[t] - submit_slot[t] + 1 for t in submit_slot if t in commit_slot]
    return LivenessResult(seed=seed, submitted=len(submit_slot), committed=len(commit_slot),
                          max_latency=max(lat) if lat else -1, crashed=tuple(sorted(ledger.crashed)))
