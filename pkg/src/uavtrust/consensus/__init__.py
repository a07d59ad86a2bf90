"""Trust-ranked PBFT ledger for behavior reports."""

from .messages import (Block, Commit, Envelope, Invite, KeyRing, PrePrepare, Prepare, RemoveReq,
                       Reply, Transaction, Update, block_digest)
from .replica import PbftReplica, quorum_commit, quorum_prepare, rotation_invite_quorum, rotation_remove_quorum
from .ledger import ConsensusState, RotationTrace, TpbftLedger, init_consensus_set

__all__ = [
    "Block", "Commit", "Envelope", "Invite", "KeyRing", "PrePrepare", "Prepare", "RemoveReq", "Reply",
    "Transaction", "Update", "block_digest", "PbftReplica", "quorum_commit", "quorum_prepare",
    "rotation_invite_quorum", "rotation_remove_quorum", "ConsensusState", "RotationTrace",
    "TpbftLedger", "init_consensus_set",
]
