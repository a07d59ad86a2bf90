"""Deliberate attack model: rank nodes by importance, misbehave on forwarding."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence


@dataclass(frozen=True)
class AttackConfig:
    f: int = 2
    p1: float = 0.5  # delivery probability
    p2: float = 0.5  # correct-path probability
    trigger_slot: int = 0

    def __post_init__(self):
        if self.f < 0:
            raise ValueError("f must be non-negative")
        for name in ("p1", "p2"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")


@dataclass(frozen=True)
class ImportanceScore:
    node: int
    lam: float


class Decision(enum.Enum):
    CORRECT = "correct"
    DROP = "drop"
    WRONG_PATH = "wrong_path"


def _adjacency(graph) -> Mapping[int, Iterable[int]]:
    return graph.gamma if hasattr(graph, "gamma") else graph


def triangles_on_edge(adj: Mapping[int, Iterable[int]], i: int, j: int) -> int:
    return len(set(adj[i]) & set(adj[j]))


def link_weight(i: int, j: int, graph) -> float:
    """Connectivity weight of link (i, j): ``Z * 2 / (m + 2)``."""
    adj = _adjacency(graph)
    m = triangles_on_edge(adj, i, j)
    zi, zj = len(adj[i]), len(adj[j])
    z = (zi - m - 1) * (zj - m - 1)
    return z * 2.0 / (m + 2)


def node_importance(i: int, graph) -> ImportanceScore:
    """Degree plus weighted link contributions.

    When both endpoints have degree one the correction fraction is 0/0 and
    is taken as 0.
    """
    adj = _adjacency(graph)
    zi = len(adj[i])
    lam = float(zi)
    for j in adj[i]:
        zj = len(adj[j])
        denom = zi + zj - 2
        frac = (zj - 1) / denom if denom != 0 else 0.0
        lam += link_weight(i, j, adj) * (1.0 - frac)
    return ImportanceScore(node=i, lam=lam)


def importance_scores(graph) -> list[ImportanceScore]:
    adj = _adjacency(graph)
    return [node_importance(i, adj) for i in sorted(adj)]


def select_attack_targets(scores: Sequence[ImportanceScore], f: int, already: Iterable[int] = ()) -> set[int]:
    taken = set(already)
    ranked = sorted((s for s in scores if s.node not in taken), key=lambda s: (-s.lam, s.node))
    return {s.node for s in ranked[: max(f, 0)]}


def malicious_forward_decision(cfg: AttackConfig, rng) -> Decision:
    """Delivery coin first, then path coin."""
    if rng.random() >= cfg.p1:
        return Decision.DROP
    if rng.random() >= cfg.p2:
        return Decision.WRONG_PATH
    return Decision.CORRECT
