"""Single PBFT replica: pre-prepare, prepare and commit handling."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from ..errors import DigestMismatch, InvalidAuth, StaleSeq
from .messages import GENESIS, Block, Commit, Envelope, KeyRing, PrePrepare, Prepare

log = logging.getLogger(__name__)


def quorum_prepare(n: int) -> int:
    return 2 * n


def quorum_commit(n: int) -> int:
    return 2 * n + 1


def rotation_remove_quorum(f: int) -> int:
    return 2 * f


def rotation_invite_quorum(f: int) -> int:
    return 2 * f + 1


@dataclass
class Fault:
    sender: int
    reason: str


@dataclass
class PbftReplica:
    """Honest replica for one configuration (fixed members, leader, view).

    :meth:`handle` consumes one envelope and returns the envelopes to send.
    Committed blocks are executed strictly in sequence order into ``chain``.
    """

    node: int
    members: tuple[int, ...]
    leader: int
    n: int
    keys: KeyRing
    view: int = 0
    chain: list[Block] = field(default_factory=list)
    accepted: dict[tuple[int, int], PrePrepare] = field(default_factory=dict)
    prepares: dict[tuple[int, int, str], set[int]] = field(default_factory=dict)
    commits: dict[tuple[int, int, str], set[int]] = field(default_factory=dict)
    sent_commit: set[tuple[int, int]] = field(default_factory=set)
    committed: dict[int, Block] = field(default_factory=dict)
    faults: list[Fault] = field(default_factory=list)

    @property
    def executed_seq(self) -> int:
        return self.chain[-1].seq if self.chain else 0

    @property
    def head_digest(self) -> str:
        return self.chain[-1].digest if self.chain else GENESIS

    def _broadcast(self, msg) -> list[Envelope]:
        return [Envelope.seal(msg, self.node, m, self.keys) for m in self.members if m != self.node]

    def propose(self, block: Block) -> list[Envelope]:
        """Leader entry point: accept own pre-prepare and broadcast it."""
        if self.node != self.leader:
            raise RuntimeError("only the leader proposes")
        pp = PrePrepare(view=self.view, seq=block.seq, digest=block.digest, block=block)
        self.accepted[(pp.view, pp.seq)] = pp
        return self._broadcast(pp)

    def handle(self, env: Envelope) -> list[Envelope]:
        try:
            return self.handle_phase(env)
        except StaleSeq:
            return []
        except (InvalidAuth, DigestMismatch) as exc:
            self.faults.append(Fault(env.sender, type(exc).__name__))
            log.debug("replica %s discarded message from %s: %s", self.node, env.sender, exc)
            return []

    def handle_phase(self, env: Envelope) -> list[Envelope]:
        if not env.valid(self.keys):
            raise InvalidAuth(f"bad signature from {env.sender}")
        if env.sender not in self.members:
            raise InvalidAuth(f"{env.sender} is not a member")
        msg = env.msg
        if getattr(msg, "view", None) != self.view:
            raise StaleSeq(f"view {getattr(msg, 'view', None)} != {self.view}")
        if msg.seq <= self.executed_seq:
            raise StaleSeq(f"seq {msg.seq} already executed")
        if isinstance(msg, PrePrepare):
            return self._on_preprepare(env.sender, msg)
        if isinstance(msg, Prepare):
            if msg.sender == self.leader:
                raise InvalidAuth("leader does not send prepare")
            self.prepares.setdefault((msg.view, msg.seq, msg.digest), set()).add(msg.sender)
            return self._progress(msg.view, msg.seq)
        if isinstance(msg, Commit):
            self.commits.setdefault((msg.view, msg.seq, msg.digest), set()).add(msg.sender)
            return self._progress(msg.view, msg.seq)
        return []

    def _on_preprepare(self, sender: int, pp: PrePrepare) -> list[Envelope]:
        if sender != self.leader:
            raise InvalidAuth(f"pre-prepare from non-leader {sender}")
        if pp.block.digest != pp.digest or not pp.block.digest_ok() or pp.block.seq != pp.seq:
            raise DigestMismatch(f"digest does not match payload at seq {pp.seq}")
        key = (pp.view, pp.seq)
        prior = self.accepted.get(key)
        if prior is not None:
            if prior.digest != pp.digest:
                raise DigestMismatch(f"leader equivocated at seq {pp.seq}")
            return []
        self.accepted[key] = pp
        prep = Prepare(view=pp.view, seq=pp.seq, digest=pp.digest, sender=self.node)
        self.prepares.setdefault((pp.view, pp.seq, pp.digest), set()).add(self.node)
        return self._broadcast(prep) + self._progress(pp.view, pp.seq)

    def prepared(self, view: int, seq: int) -> str | None:
        pp = self.accepted.get((view, seq))
        if pp is None:
            return None
        votes = self.prepares.get((view, seq, pp.digest), set()) - {self.leader}
        return pp.digest if len(votes) >= quorum_prepare(self.n) else None

    def _progress(self, view: int, seq: int) -> list[Envelope]:
        out: list[Envelope] = []
        digest = self.prepared(view, seq)
        if digest is None:
            return out
        if (view, seq) not in self.sent_commit:
            self.sent_commit.add((view, seq))
            self.commits.setdefault((view, seq, digest), set()).add(self.node)
            out += self._broadcast(Commit(view=view, seq=seq, digest=digest, sender=self.node))
        votes = self.commits.get((view, seq, digest), set()) & set(self.members)
        if len(votes) >= quorum_commit(self.n) and seq not in self.committed:
            self.committed[seq] = self.accepted[(view, seq)].block
            self._execute()
        return out

    def _execute(self) -> None:
        while self.executed_seq + 1 in self.committed:
            block = self.committed[self.executed_seq + 1]
            if block.prev_digest != self.head_digest:
                # a block proposed on a stale head cannot be linked; leave it
                log.info("replica %s: block %s does not link to head", self.node, block.seq)
                break
            self.chain.append(block)
        done = self.executed_seq
        for d in (self.prepares, self.commits):
            for key in [k for k in d if k[1] <= done]:
                del d[key]
        for key in [k for k in self.accepted if k[1] <= done]:
            del self.accepted[key]

    def retransmit(self) -> list[Envelope]:
        """Re-send own protocol messages for instances not yet executed."""
        out: list[Envelope] = []
        for (view, seq), pp in sorted(self.accepted.items()):
            if seq <= self.executed_seq or view != self.view:
                continue
            if self.node == self.leader:
                out += self._broadcast(pp)
            else:
                out += self._broadcast(Prepare(view=view, seq=seq, digest=pp.digest, sender=self.node))
            if (view, seq) in self.sent_commit:
                out += self._broadcast(Commit(view=view, seq=seq, digest=pp.digest, sender=self.node))
        return out
