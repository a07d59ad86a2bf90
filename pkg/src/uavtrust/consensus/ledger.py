"""Trust-ranked consensus set, message bus, block commit and membership rotation."""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from ..errors import InvalidAuth, NoCandidate, NoConsensusReachable, TooFewNodes
from .messages import GENESIS, Block, Envelope, Invite, KeyRing, RemoveReq, Reply, Transaction, Update
from .replica import PbftReplica, rotation_invite_quorum, rotation_remove_quorum

log = logging.getLogger(__name__)

Reachable = Callable[[int, int], bool]


def _always(a: int, b: int) -> bool:
    return True


def _rank(trust: Mapping[int, float], nodes: Iterable[int]) -> list[int]:
    return sorted(nodes, key=lambda i: (-trust.get(i, 1.0), i))


@dataclass
class ConsensusState:
    members: tuple[int, ...]
    leader: int
    n: int
    view: int = 0
    next_seq: int = 1
    candidates: tuple[int, ...] = ()
    rounds_since_rotation: int = 0
    M: int = 5


def init_consensus_set(trust: Mapping[int, float], n: int, M: int = 5) -> ConsensusState:
    """Top ``3n + 1`` nodes by trust (ties to lower id); leader is the first."""
    size = 3 * n + 1
    if n < 1 or len(trust) < size:
        raise TooFewNodes(f"need {size} nodes for n={n}, have {len(trust)}")
    ranked = _rank(trust, trust.keys())
    members = tuple(ranked[:size])
    return ConsensusState(members=members, leader=members[0], n=n, candidates=tuple(ranked[size:]), M=M)


class MessageBus:
    """Same-slot delivery among reachable, responsive nodes with optional loss."""

    def __init__(self, rng: np.random.Generator | None = None, drop_prob: float = 0.0):
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.drop_prob = drop_prob
        self.sent = 0
        self.delivered = 0

    def run(self, envelopes: Iterable[Envelope], handlers: Mapping[int, Callable[[Envelope], list[Envelope]]],
            reachable: Reachable, down: set[int], max_steps: int = 100_000) -> None:
        queue = deque(envelopes)
        steps = 0
        while queue and steps < max_steps:
            env = queue.popleft()
            steps += 1
            self.sent += 1
            if env.sender in down or env.dest in down or not reachable(env.sender, env.dest):
                continue
            if self.drop_prob > 0 and self.rng.random() < self.drop_prob:
                continue
            handler = handlers.get(env.dest)
            if handler is None:
                continue
            self.delivered += 1
            queue.extend(handler(env))


@dataclass
class RotationTrace:
    slot: int
    removed: int | None
    reason: str
    trust_of_removed: float
    min_member_trust: float
    removal_confirmations: dict[int, int] = field(default_factory=dict)
    joiner: int | None = None
    invites_received: int = 0
    updates_received: int = 0
    replies_received: dict[int, int] = field(default_factory=dict)
    members_before: tuple[int, ...] = ()
    members_after: tuple[int, ...] = ()
    f: int = 1


class TpbftLedger:
    """Consensus set plus the replicated chain of behavior-report blocks.

    One call to :meth:`run_round` is one consensus round (one slot): the
    leader packs pending transactions into at most one block and the
    three-phase exchange runs over the bus. After ``M`` rounds,
    :meth:`rotate_membership` swaps one member out and one candidate in.
    """

    def __init__(self, trust: Mapping[int, float], n: int = 1, M: int = 5, f: int = 1,
                 keys: KeyRing | None = None, rng: np.random.Generator | None = None,
                 drop_prob: float = 0.0):
        self.state = init_consensus_set(trust, n, M)
        self.n_target = n
        self.f = f
        self.keys = keys or KeyRing(0)
        self.bus = MessageBus(rng, drop_prob)
        self.chain: list[Block] = []
        self.pending: list[Transaction] = []
        self.in_flight: Block | None = None
        self.last_proposed_digest = GENESIS
        self.applied: set[int] = set()
        self.crashed: set[int] = set()
        self.rotations: list[RotationTrace] = []
        self.rejected_submitters: list[int] = []
        self.commits = 0
        self.stalled_rounds = 0
        self._build_replicas()

    @property
    def members(self) -> tuple[int, ...]:
        return self.state.members

    @property
    def leader(self) -> int:
        return self.state.leader

    def _build_replicas(self) -> None:
        s = self.state
        self.replicas = {
            m: PbftReplica(node=m, members=s.members, leader=s.leader, n=s.n, keys=self.keys,
                           view=s.view, chain=list(self.chain))
            for m in s.members
        }

    def submit_transaction(self, tx: Transaction, origin: int, positions: Sequence | None = None,
                           reachable: Reachable = _always, down: Iterable[int] = ()) -> int:
        """Route ``tx`` via the nearest reachable member to the leader.

        Returns the number of relay hops (0 when the nearest member is the
        leader). Raises :class:`NoConsensusReachable` or :class:`InvalidAuth`.
        """
        down = set(down) | self.crashed
        live = [m for m in self.members if m not in down and (m == origin or reachable(origin, m))]
        if not live:
            raise NoConsensusReachable(f"node {origin} reaches no consensus member")
        if positions is not None:
            po = np.asarray(positions[origin], dtype=float)
            live.sort(key=lambda m: (float(np.linalg.norm(np.asarray(positions[m], dtype=float) - po)), m))
        entry = live[0]
        leader = self.leader
        if leader in down or not (entry == leader or reachable(entry, leader)):
            raise NoConsensusReachable(f"leader {leader} unreachable from {entry}")
        if not tx.verify(self.keys):
            self.rejected_submitters.append(tx.submitter)
            raise InvalidAuth(f"transaction {tx.id} from {tx.submitter} failed authentication")
        self.pending.append(tx)
        return 0 if entry == leader else 1

    def run_round(self, slot: int = 0, reachable: Reachable = _always, down: Iterable[int] = ()) -> list[Block]:
        """Run one consensus round; return newly committed blocks."""
        down = set(down) | self.crashed
        out: list[Envelope] = []
        for m, rep in self.replicas.items():
            if m not in down:
                out += rep.retransmit()
        leader_rep = self.replicas[self.leader]
        if self.in_flight is None and self.pending and self.leader not in down:
            block = Block.build(self.state.next_seq, self.state.view, self.pending, self.leader,
                                self.last_proposed_digest)
            self.pending = []
            self.in_flight = block
            self.last_proposed_digest = block.digest
            self.state.next_seq += 1
            out += leader_rep.propose(block)
        handlers = {m: rep.handle for m, rep in self.replicas.items()}
        self.bus.run(out, handlers, reachable, down)
        new = self._sync_chain(down)
        if self.in_flight is not None and any(b.seq == self.in_flight.seq for b in self.chain):
            self.in_flight = None
        if self.in_flight is not None:
            self.stalled_rounds += 1
        self.state.rounds_since_rotation += 1
        return new

    def _sync_chain(self, down: set[int]) -> list[Block]:
        best = max((rep.chain for m, rep in self.replicas.items() if m not in down),
                   key=len, default=self.chain)
        new = list(best[len(self.chain):])
        self.chain.extend(new)
        self.commits += len(new)
        return new

    def apply_committed_reports(self, trust_table) -> int:
        """Fold reports from committed blocks exactly once per block seq."""
        folded = 0
        for block in self.chain:
            if block.seq in self.applied:
                continue
            self.applied.add(block.seq)
            for tx in block.txs:
                trust_table.fold(tx.reports)
                folded += len(tx.reports)
        return folded

    def rotation_due(self) -> bool:
        return self.state.rounds_since_rotation >= self.state.M

    def rotate_membership(self, trust: Mapping[int, float], thr: float, slot: int = 0,
                          reachable: Reachable = _always, down: Iterable[int] = (),
                          excluded: Iterable[int] = ()) -> list[RotationTrace]:
        """Swap out below-threshold members (or the weakest) and invite replacements.

        ``excluded`` nodes (flagged or isolated) are never invited.
        """
        down = set(down) | self.crashed
        excluded = set(excluded)
        members = list(self.members)
        below = [m for m in _rank(trust, members)[::-1] if trust.get(m, 1.0) < thr]
        if below:
            targets = [(m, "below_threshold") for m in below]
        else:
            targets = [(_rank(trust, members)[-1], "min_trust")]
        traces = []
        for subject, reason in targets:
            traces.append(self._rotation_cycle(subject, reason, trust, thr, slot, reachable, down, excluded))
        self._reconfigure(trust)
        self.rotations.extend(traces)
        return traces

    def _rotation_cycle(self, subject: int, reason: str, trust: Mapping[int, float], thr: float, slot: int,
                        reachable: Reachable, down: set[int], excluded: set[int]) -> RotationTrace:
        f = self.f
        before = tuple(self.state.members)
        remaining = [m for m in before if m != subject]
        trace = RotationTrace(slot=slot, removed=None, reason=reason, trust_of_removed=trust.get(subject, 1.0),
                              min_member_trust=min(trust.get(m, 1.0) for m in before),
                              members_before=before, f=f)
        live = [m for m in remaining if m not in down]

        # removal: coordinator launches, every member echoes once
        confirmations: dict[int, set[int]] = {m: set() for m in remaining}
        echoed: set[int] = set()

        def on_remove(env: Envelope) -> list[Envelope]:
            me = env.dest
            confirmations[me].add(env.sender)
            if me in echoed:
                return []
            echoed.add(me)
            return [Envelope.seal(RemoveReq(subject, trust.get(subject, 1.0), me), me, o, self.keys)
                    for o in remaining if o != me]

        coordinator = next((m for m in _rank(trust, remaining) if m not in down), None)
        if coordinator is not None:
            echoed.add(coordinator)
            launch = [Envelope.seal(RemoveReq(subject, trust.get(subject, 1.0), coordinator), coordinator, o, self.keys)
                      for o in remaining if o != coordinator]
            self._deliver_with_retry(launch, {m: on_remove for m in remaining}, reachable, down)
        trace.removal_confirmations = {m: len(confirmations[m]) for m in remaining}
        need_remove = rotation_remove_quorum(f)
        if not live or any(trace.removal_confirmations[m] < need_remove for m in live):
            log.warning("rotation at slot %s: removal of %s lacked %d confirmations", slot, subject, need_remove)
            return trace
        trace.removed = subject
        self.state.members = tuple(remaining)

        pool = [c for c in _rank(trust, trust.keys())
                if c not in before and c not in excluded and c not in down and trust.get(c, 1.0) >= thr]
        if not pool:
            log.warning("rotation at slot %s: no candidate, membership shrinks to %d", slot, len(remaining))
            trace.members_after = tuple(remaining)
            return trace
        cand = pool[0]
        need_join = rotation_invite_quorum(f)
        invites: set[int] = set()
        replies: dict[int, int] = {m: 0 for m in remaining}
        updates_to_cand: set[int] = set()
        updates_seen: dict[int, set[int]] = {m: set() for m in remaining}
        replied = False
        acked: set[int] = set()

        def on_invite(env: Envelope) -> list[Envelope]:
            nonlocal replied
            invites.add(env.sender)
            if replied or len(invites) < need_join:
                return []
            replied = True
            return [Envelope.seal(Reply(cand, cand), cand, m, self.keys) for m in remaining]

        def on_reply(env: Envelope) -> list[Envelope]:
            me = env.dest
            replies[me] += 1
            if me in acked:
                return []
            acked.add(me)
            updates_seen[me].add(me)
            msg = Update(cand, me)
            return [Envelope.seal(msg, me, o, self.keys) for o in remaining + [cand] if o != me]

        def on_update(env: Envelope) -> list[Envelope]:
            if env.dest == cand:
                updates_to_cand.add(env.sender)
            else:
                updates_seen[env.dest].add(env.sender)
            return []

        def member_handler(env: Envelope) -> list[Envelope]:
            return on_reply(env) if isinstance(env.msg, Reply) else on_update(env)

        def cand_handler(env: Envelope) -> list[Envelope]:
            return on_invite(env) if isinstance(env.msg, Invite) else on_update(env)

        handlers = {m: member_handler for m in remaining}
        handlers[cand] = cand_handler
        invites_out = [Envelope.seal(Invite(cand, m), m, cand, self.keys) for m in remaining]
        self._deliver_with_retry(invites_out, handlers, reachable, down)
        trace.invites_received = len(invites)
        trace.replies_received = dict(replies)
        trace.updates_received = len(updates_to_cand)
        if len(updates_to_cand) >= need_join:
            trace.joiner = cand
            self.state.members = tuple(remaining) + (cand,)
        else:
            log.warning("rotation at slot %s: candidate %s got %d invites / %d updates (need %d)",
                        slot, cand, len(invites), len(updates_to_cand), need_join)
        trace.members_after = tuple(self.state.members)
        return trace

    def _deliver_with_retry(self, envelopes: list[Envelope], handlers, reachable: Reachable, down: set[int],
                            rounds: int = 10) -> None:
        # lost messages are re-sent; handlers are idempotent per sender
        for _ in range(rounds):
            self.bus.run(list(envelopes), handlers, reachable, down)
            if self.bus.drop_prob == 0:
                return

    def _reconfigure(self, trust: Mapping[int, float]) -> None:
        s = self.state
        best = max((rep.chain for rep in self.replicas.values()), key=len, default=self.chain)
        if len(best) > len(self.chain):
            self.commits += len(best) - len(self.chain)
            self.chain.extend(best[len(self.chain):])
        if self.in_flight is not None and not any(b.seq == self.in_flight.seq for b in self.chain):
            self.pending = list(self.in_flight.txs) + self.pending
        self.in_flight = None
        self.last_proposed_digest = self.chain[-1].digest if self.chain else GENESIS
        s.next_seq = (self.chain[-1].seq if self.chain else 0) + 1
        ranked = _rank(trust, s.members)
        s.members = tuple(ranked)
        s.leader = ranked[0]
        s.n = max((len(ranked) - 1) // 3, 0)
        s.view += 1
        s.rounds_since_rotation = 0
        s.candidates = tuple(c for c in _rank(trust, trust.keys()) if c not in s.members)
        if s.n < self.n_target:
            log.warning("consensus set degraded to %d members (n=%d)", len(ranked), s.n)
        self._build_replicas()

    def dump(self) -> str:
        """Ordered block list as text: seq, view, digest, report count."""
        lines = ["seq\tview\tdigest\treports"]
        for b in self.chain:
            lines.append(f"{b.seq}\t{b.view}\t{b.digest}\t{b.report_count()}")
        return "\n".join(lines) + "\n"
