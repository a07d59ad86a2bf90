"""Ledger entries, protocol messages and simulated authentication.

Signatures are keyed hashes over a canonical encoding, with one secret per
node. They stand in for real signatures/MACs: a node can only produce
tokens for its own id.
"""

from __future__ import annotations

import hashlib
import hmac
from dataclasses import dataclass
from typing import Union

from ..trust import BehaviorReport

GENESIS = "0" * 64


class KeyRing:
    def __init__(self, seed: int = 0):
        self.seed = seed
        self._keys: dict[int, bytes] = {}

    def key(self, node: int) -> bytes:
        k = self._keys.get(node)
        if k is None:
            k = hashlib.sha256(f"uavtrust-key:{self.seed}:{node}".encode()).digest()
            self._keys[node] = k
        return k

    def sign(self, node: int, payload: str) -> str:
        return hmac.new(self.key(node), payload.encode(), hashlib.sha256).hexdigest()[:32]

    def verify(self, node: int, payload: str, token: str) -> bool:
        return hmac.compare_digest(self.sign(node, payload), token)


@dataclass(frozen=True)
class Transaction:
    id: str
    reports: tuple[BehaviorReport, ...]
    submitter: int
    auth_token: str = ""

    def payload(self) -> str:
        return f"tx:{self.id}:{self.submitter}:" + ",".join(r.encode() for r in self.reports)

    @classmethod
    def create(cls, tx_id: str, reports, submitter: int, keys: KeyRing) -> "Transaction":
        reports = tuple(reports)
        if not reports:
            raise ValueError("a transaction needs at least one report")
        tx = cls(id=tx_id, reports=reports, submitter=submitter)
        return cls(id=tx_id, reports=reports, submitter=submitter, auth_token=keys.sign(submitter, tx.payload()))

    def verify(self, keys: KeyRing) -> bool:
        return bool(self.reports) and keys.verify(self.submitter, self.payload(), self.auth_token)


def block_digest(prev_digest: str, txs: tuple[Transaction, ...], proposer: int) -> str:
    h = hashlib.sha256()
    h.update(prev_digest.encode())
    h.update(f"|{proposer}|".encode())
    for tx in txs:
        h.update(tx.payload().encode())
        h.update(b";")
    return h.hexdigest()


@dataclass(frozen=True)
class Block:
    seq: int
    view: int
    digest: str
    txs: tuple[Transaction, ...]
    proposer: int
    prev_digest: str = GENESIS

    @classmethod
    def build(cls, seq: int, view: int, txs, proposer: int, prev_digest: str = GENESIS) -> "Block":
        txs = tuple(txs)
        return cls(seq=seq, view=view, digest=block_digest(prev_digest, txs, proposer), txs=txs,
                   proposer=proposer, prev_digest=prev_digest)

    def digest_ok(self) -> bool:
        return self.digest == block_digest(self.prev_digest, self.txs, self.proposer)

    def report_count(self) -> int:
        return sum(len(tx.reports) for tx in self.txs)


@dataclass(frozen=True)
class PrePrepare:
    view: int
    seq: int
    digest: str
    block: Block


@dataclass(frozen=True)
class Prepare:
    view: int
    seq: int
    digest: str
    sender: int


@dataclass(frozen=True)
class Commit:
    view: int
    seq: int
    digest: str
    sender: int


@dataclass(frozen=True)
class RemoveReq:
    subject: int
    evidence: float
    sender: int


@dataclass(frozen=True)
class Invite:
    candidate: int
    sender: int


@dataclass(frozen=True)
class Reply:
    candidate: int
    sender: int


@dataclass(frozen=True)
class Update:
    candidate: int
    sender: int


Message = Union[PrePrepare, Prepare, Commit, RemoveReq, Invite, Reply, Update]


def encode(msg: Message) -> str:
    if isinstance(msg, PrePrepare):
        return f"PP:{msg.view}:{msg.seq}:{msg.digest}"
    if isinstance(msg, (Prepare, Commit)):
        return f"{type(msg).__name__}:{msg.view}:{msg.seq}:{msg.digest}:{msg.sender}"
    if isinstance(msg, RemoveReq):
        return f"RM:{msg.subject}:{msg.evidence!r}:{msg.sender}"
    return f"{type(msg).__name__}:{msg.candidate}:{msg.sender}"


@dataclass(frozen=True)
class Envelope:
    msg: Message
    sender: int
    dest: int
    signature: str

    @classmethod
    def seal(cls, msg: Message, sender: int, dest: int, keys: KeyRing) -> "Envelope":
        return cls(msg=msg, sender=sender, dest=dest, signature=keys.sign(sender, encode(msg)))

    def valid(self, keys: KeyRing) -> bool:
        claimed = getattr(self.msg, "sender", self.sender)
        return claimed == self.sender and keys.verify(self.sender, encode(self.msg), self.signature)
