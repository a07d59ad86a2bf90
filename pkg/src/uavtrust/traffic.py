"""Demands, FIFO queues, delay bookkeeping and flow validation."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .errors import DomainError, InvariantBreach, NoRoute, NotDelivered, QueueFull

DEFAULT_C_MAX = 50
DEFAULT_T_ONE_MAX = 0.5

FORWARD = "forward"
HOLD = "hold"
PENALTY = "penalty"


@dataclass
class HopRecord:
    frm: int
    to: int
    slot: int
    queue_delay: float
    tx_delay: float
    clipped: bool = False
    followed_specified_path: bool = True
    kind: str = FORWARD
    seq: int = -1  # creation order within a run

    @property
    def delay(self) -> float:
        return self.queue_delay + self.tx_delay


@dataclass
class Demand:
    id: int
    source: int
    destination: int
    size: float
    birth_slot: int = 0
    path: list[HopRecord] = field(default_factory=list)
    delivered: bool = False
    dropped: bool = False
    holder: int | None = None
    prev_holder: int | None = None
    accumulated_delay: float = 0.0

    def __post_init__(self):
        if self.source == self.destination:
            raise ValueError("source and destination must differ")
        if self.size < 0:
            raise ValueError("size must be non-negative")
        if self.holder is None:
            self.holder = self.source

    @property
    def finished(self) -> bool:
        return self.delivered or self.dropped

    def add_hop(self, hop: HopRecord) -> None:
        self.path.append(hop)
        self.accumulated_delay += hop.delay


class FifoQueue:
    """Bounded first-in-first-out queue of demand ids."""

    def __init__(self, capacity: int = DEFAULT_C_MAX):
        if capacity < 0:
            raise ValueError("capacity must be non-negative")
        self.capacity = capacity
        self.entries: deque[int] = deque()

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __contains__(self, item) -> bool:
        return item in self.entries

    def enqueue(self, demand_id: int) -> None:
        if len(self.entries) >= self.capacity:
            raise QueueFull(f"queue at capacity {self.capacity}")
        self.entries.append(demand_id)

    def head(self) -> int | None:
        return self.entries[0] if self.entries else None

    def remove(self, demand_id: int) -> None:
        self.entries.remove(demand_id)

    def snapshot(self) -> tuple[int, ...]:
        return tuple(self.entries)


def enqueue(q: FifoQueue, d: Demand | int) -> None:
    q.enqueue(d.id if isinstance(d, Demand) else d)


def update_queue_length(c_prev: int, rx_prev: int, tx_prev: int, c_max: int = DEFAULT_C_MAX) -> int:
    if min(c_prev, rx_prev, tx_prev) < 0:
        raise InvariantBreach("negative count")
    c = c_prev + rx_prev - tx_prev
    if not 0 <= c <= c_max:
        raise InvariantBreach(f"queue length {c} outside [0, {c_max}]")
    return c


def transmission_delay(size_bits: float, rate: float) -> float:
    if not rate > 0:
        raise DomainError(f"rate must be positive, got {rate}")
    return size_bits / rate


def queue_delay(ahead: Iterable[tuple[float, float | None]], strict: bool = True) -> float:
    """Waiting time behind the queued demands ``ahead``.

    Each entry is ``(size_bits, rate_of_its_next_hop)``. An entry with no
    next hop this slot raises :class:`NoRoute` when ``strict``; otherwise it
    contributes nothing (it waits and is charged next slot).
    """
    total = 0.0
    for size, rate in ahead:
        if rate is None:
            if strict:
                raise NoRoute("queued demand has no next hop this slot")
            continue
        total += transmission_delay(size, rate)
    return total


def hop_delay(queue_d: float, tx_d: float, t_one_max: float = DEFAULT_T_ONE_MAX) -> tuple[float, bool]:
    if queue_d < 0 or tx_d < 0:
        raise DomainError("delays must be non-negative")
    delay = queue_d + tx_d
    return delay, delay > t_one_max


def clipped_delay(hop: HopRecord, t_one_max: float) -> float:
    return min(hop.delay, t_one_max)


def end_to_end_delay(d: Demand) -> float:
    if not d.delivered:
        raise NotDelivered(f"demand {d.id} not delivered")
    total = 0.0
    for hop in d.path:
        total += hop.queue_delay + hop.tx_delay
    return total


@dataclass(frozen=True)
class FlowEvent:
    """One slot's action on one demand; ``frm == to`` is a hold."""

    slot: int
    demand: int
    frm: int
    to: int


def validate_flow(events: Sequence[FlowEvent], demands: Mapping[int, Demand]) -> list[str]:
    """Check one-action-per-slot flow rules on a routing trace.

    Returns an empty list when the trace is consistent, else a list of
    human-readable violations tagged with the rule they break:
    ``source-egress``, ``relay-conservation``, ``single-path`` and
    ``destination-ingress``.
    """
    violations: list[str] = []
    by_demand: dict[int, list[FlowEvent]] = {}
    for ev in events:
        by_demand.setdefault(ev.demand, []).append(ev)

    for rid, evs in sorted(by_demand.items()):
        dem = demands.get(rid)
        if dem is None:
            violations.append(f"single-path: unknown demand {rid}")
            continue
        per_slot: dict[int, list[FlowEvent]] = {}
        for ev in evs:
            per_slot.setdefault(ev.slot, []).append(ev)
        for slot, group in sorted(per_slot.items()):
            if len(group) != 1:
                senders = sorted({e.frm for e in group})
                rule = "source-egress" if dem.source in senders and len(senders) == 1 and slot == min(per_slot) else "single-path"
                violations.append(f"{rule}: demand {rid} has {len(group)} actions in slot {slot}")
        ordered = sorted(evs, key=lambda e: e.slot)
        first = ordered[0]
        if first.frm != dem.source:
            violations.append(f"source-egress: demand {rid} first leaves {first.frm}, not source {dem.source}")
        holder = dem.source
        prev_slot = None
        arrivals = 0
        for ev in ordered:
            if prev_slot is not None and ev.slot == prev_slot:
                continue
            if prev_slot is not None and ev.slot != prev_slot + 1:
                violations.append(f"relay-conservation: demand {rid} unaccounted between slots {prev_slot} and {ev.slot}")
            if ev.frm != holder:
                violations.append(f"relay-conservation: demand {rid} sent by {ev.frm} in slot {ev.slot} but held by {holder}")
            if holder == dem.destination:
                violations.append(f"destination-ingress: demand {rid} moves after reaching destination")
            if ev.to == dem.destination and ev.frm != ev.to:
                arrivals += 1
            holder = ev.to
            prev_slot = ev.slot
        if arrivals > 1:
            violations.append(f"destination-ingress: demand {rid} delivered {arrivals} times")
        if dem.delivered and arrivals != 1:
            violations.append(f"destination-ingress: delivered demand {rid} has {arrivals} arrivals")
    return violations
