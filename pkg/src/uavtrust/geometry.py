"""Geometry, mobility and per-slot topology construction."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .errors import ResampleExhausted, SafetyViolation

Vec3 = np.ndarray  # shape (3,), meters or meters/second

MAX_RESAMPLE_ATTEMPTS = 100


@dataclass(frozen=True)
class SlotConfig:
    tau: float = 1.0
    horizon: int = 20
    d_max: float = 600.0
    d_min: float = 10.0
    q: int = 6
    speed: float = 3.0
    arena_x: tuple[float, float] = (0.0, 1500.0)
    arena_y: tuple[float, float] = (0.0, 1500.0)
    arena_z: tuple[float, float] = (120.0, 140.0)

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if not 0 < self.d_min < self.d_max:
            raise ValueError("need 0 < d_min < d_max")
        if self.q < 1:
            raise ValueError("q must be at least 1")
        if self.speed < 0:
            raise ValueError("speed must be non-negative")

    @property
    def lower(self) -> np.ndarray:
        return np.array([self.arena_x[0], self.arena_y[0], self.arena_z[0]], dtype=float)

    @property
    def upper(self) -> np.ndarray:
        return np.array([self.arena_x[1], self.arena_y[1], self.arena_z[1]], dtype=float)


@dataclass
class NodeState:
    """Kinematic and status record of one node for one slot.

    ``is_malicious`` means flagged by the trust mechanism, not ground-truth
    compromise; the adversary keeps the ground truth separately.
    """

    id: int
    position: np.ndarray
    velocity: np.ndarray
    queue: Any = None
    energy_used_slot: float = 0.0
    is_malicious: bool = False
    is_isolated: bool = False

    @property
    def excluded(self) -> bool:
        return self.is_malicious or self.is_isolated


@dataclass(frozen=True)
class TopologySnapshot:
    slot: int
    states: tuple[NodeState, ...]
    gamma: Mapping[int, tuple[int, ...]]
    rates: Mapping[tuple[int, int], float]
    dist: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return len(self.states)

    def neighbors(self, i: int) -> tuple[int, ...]:
        return self.gamma.get(i, ())

    def has_link(self, i: int, j: int) -> bool:
        return (i, j) in self.rates

    def degree(self, i: int) -> int:
        return len(self.gamma.get(i, ()))

    def position(self, i: int) -> np.ndarray:
        return self.states[i].position

    def edges(self) -> list[tuple[int, int]]:
        return sorted((i, j) for (i, j) in self.rates if i < j)


def distance(a: Sequence[float], b: Sequence[float]) -> float:
    """Euclidean distance between two points in meters."""
    dx = float(a[0]) - float(b[0])
    dy = float(a[1]) - float(b[1])
    dz = float(a[2]) - float(b[2])
    return math.sqrt(dx * dx + dy * dy + dz * dz)


def distance_matrix(positions: np.ndarray) -> np.ndarray:
    diff = positions[:, None, :] - positions[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def safety_violations(dist: np.ndarray, d_min: float) -> list[tuple[int, int]]:
    n = dist.shape[0]
    iu, ju = np.triu_indices(n, k=1)
    bad = dist[iu, ju] < d_min
    return [(int(a), int(b)) for a, b in zip(iu[bad], ju[bad])]


def candidate_neighbors(i: int, snapshot_or_dist, cfg: SlotConfig, check_safety: bool = True) -> set[int]:
    """Nodes within ``d_max`` of ``i`` (inclusive).

    Accepts a :class:`TopologySnapshot` or a raw distance matrix. Raises
    :class:`SafetyViolation` when any pair is closer than ``d_min``.
    """
    dist = snapshot_or_dist.dist if isinstance(snapshot_or_dist, TopologySnapshot) else np.asarray(snapshot_or_dist)
    if check_safety:
        bad = safety_violations(dist, cfg.d_min)
        if bad:
            raise SafetyViolation(bad)
    row = dist[i]
    return {k for k in range(len(row)) if k != i and row[k] <= cfg.d_max}


def select_links(
    i: int,
    candidates: Iterable[int],
    trust: Mapping[int, float] | None,
    q: int,
    thr: float,
    distances: Mapping[int, float] | Sequence[float],
    flagged: Iterable[int] = (),
) -> tuple[int, ...]:
    """Keep the ``q`` nearest candidates that are trusted and not flagged.

    Ties on distance go to the lower node id.
    """
    flagged = set(flagged)
    eligible = [
        k
        for k in candidates
        if k != i and k not in flagged and (trust is None or trust.get(k, 1.0) >= thr)
    ]
    eligible.sort(key=lambda k: (distances[k], k))
    return tuple(eligible[:q])


def advance(position: np.ndarray, velocity: np.ndarray, tau: float, cfg: SlotConfig) -> tuple[np.ndarray, np.ndarray]:
    """Move one slot at constant velocity, reflecting off the arena walls."""
    lo, hi = cfg.lower, cfg.upper
    pos = np.asarray(position, dtype=float) + np.asarray(velocity, dtype=float) * tau
    vel = np.array(velocity, dtype=float)
    for ax in range(3):
        if pos[ax] < lo[ax]:
            pos[ax] = 2 * lo[ax] - pos[ax]
            vel[ax] = -vel[ax]
        elif pos[ax] > hi[ax]:
            pos[ax] = 2 * hi[ax] - pos[ax]
            vel[ax] = -vel[ax]
    return np.clip(pos, lo, hi), vel


def random_direction(rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=3)
    norm = np.linalg.norm(v)
    while norm < 1e-12:
        v = rng.normal(size=3)
        norm = np.linalg.norm(v)
    return v / norm


def place_nodes(n: int, cfg: SlotConfig, rng: np.random.Generator) -> list[NodeState]:
    """Uniform random placement respecting ``d_min``."""
    lo, hi = cfg.lower, cfg.upper
    positions: list[np.ndarray] = []
    for i in range(n):
        for _ in range(MAX_RESAMPLE_ATTEMPTS * 10):
            p = lo + rng.random(3) * (hi - lo)
            if all(distance(p, other) >= cfg.d_min for other in positions):
                break
        else:
            raise ResampleExhausted(f"could not place node {i}")
        positions.append(p)
    return [NodeState(id=i, position=p, velocity=np.zeros(3)) for i, p in enumerate(positions)]


def step_mobility(states: Sequence[NodeState], cfg: SlotConfig, rng: np.random.Generator) -> list[NodeState]:
    """Draw a fresh heading per node, advance one slot, enforce ``d_min``.

    Nodes involved in a safe-distance violation redraw their heading, up to
    ``MAX_RESAMPLE_ATTEMPTS`` rounds.
    """
    n = len(states)
    old = np.array([s.position for s in states], dtype=float)
    vel = np.array([random_direction(rng) * cfg.speed for _ in range(n)]) if n else np.zeros((0, 3))
    movable = np.ones(n, dtype=bool)
    for _ in range(MAX_RESAMPLE_ATTEMPTS):
        new_pos = np.empty_like(old)
        new_vel = np.empty_like(vel)
        for k in range(n):
            new_pos[k], new_vel[k] = advance(old[k], vel[k], cfg.tau, cfg)
        bad = safety_violations(distance_matrix(new_pos), cfg.d_min) if n else []
        if not bad:
            return [replace(s, position=new_pos[k], velocity=new_vel[k]) for k, s in enumerate(states)]
        culprits = sorted({a for pair in bad for a in pair})
        for k in culprits:
            if movable[k]:
                vel[k] = random_direction(rng) * cfg.speed
    raise ResampleExhausted(f"d_min={cfg.d_min} unsatisfied after {MAX_RESAMPLE_ATTEMPTS} attempts")


def build_topology(
    states: Sequence[NodeState],
    trust: Mapping[int, float] | None,
    cfg: SlotConfig,
    rate_fn,
    thr: float = 0.8,
    slot: int = 0,
) -> TopologySnapshot:
    """Compute candidate sets, per-node link choice, symmetrize, attach rates.

    ``rate_fn(d)`` maps a distance in meters to a rate in bit/s. A link
    survives only when both endpoints select each other.
    """
    positions = np.array([s.position for s in states], dtype=float).reshape(-1, 3)
    dist = distance_matrix(positions)
    bad = safety_violations(dist, cfg.d_min)
    if bad:
        raise SafetyViolation(bad)
    flagged = {s.id for s in states if s.excluded}
    chosen: dict[int, tuple[int, ...]] = {}
    for s in states:
        if s.excluded:
            chosen[s.id] = ()
            continue
        cands = candidate_neighbors(s.id, dist, cfg, check_safety=False)
        chosen[s.id] = select_links(s.id, cands, trust, cfg.q, thr, dist[s.id], flagged)
    gamma: dict[int, tuple[int, ...]] = {}
    rates: dict[tuple[int, int], float] = {}
    for s in states:
        i = s.id
        keep = tuple(j for j in chosen[i] if i in chosen[j])
        gamma[i] = keep
        for j in keep:
            if (j, i) in rates:
                rates[(i, j)] = rates[(j, i)]
            else:
                rates[(i, j)] = float(rate_fn(float(dist[i, j])))
    return TopologySnapshot(slot=slot, states=tuple(states), gamma=gamma, rates=rates, dist=dist)
