"""Behavior bookkeeping and trust evolution.

Each node carries cumulative delivery and path-correctness counters. Once
per step the three-way weights are computed from the current trust and the
two behavior scores, and the new trust is their convex combination.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Sequence

from .errors import DomainError

NOT_DETECTED = -1


class WeightScheme(enum.Enum):
    ADAPTIVE = "adaptive"
    AVERAGE = "average"
    RANDOM = "random"


@dataclass(frozen=True)
class TrustRecord:
    node: int
    T: float = 1.0
    T_dr: float = 1.0
    T_tp: float = 1.0
    cum_rx: int = 0
    cum_tx: int = 0
    cum_paths: int = 0
    cum_bad_paths: int = 0
    flagged: bool = False
    flag_slot: int | None = None


@dataclass(frozen=True)
class Delivery:
    rx: int
    tx: int


@dataclass(frozen=True)
class PathCheck:
    total: int
    bad: int


@dataclass(frozen=True)
class BehaviorReport:
    reporter: int
    subject: int
    slot: int
    kind: Delivery | PathCheck

    def __post_init__(self):
        if self.reporter == self.subject:
            raise ValueError("a node cannot report on itself")
        k = self.kind
        if isinstance(k, Delivery):
            if k.rx < 0 or k.tx < 0 or k.tx > k.rx:
                raise ValueError("delivery report needs 0 <= tx <= rx")
        elif isinstance(k, PathCheck):
            if k.total < 0 or k.bad < 0 or k.bad > k.total:
                raise ValueError("path report needs 0 <= bad <= total")
        else:
            raise TypeError(f"unknown report kind {k!r}")

    def encode(self) -> str:
        k = self.kind
        tag = f"D{k.rx}/{k.tx}" if isinstance(k, Delivery) else f"P{k.total}/{k.bad}"
        return f"{self.reporter}>{self.subject}@{self.slot}:{tag}"


def delivery_rate_eval(rec: TrustRecord) -> float:
    if rec.cum_rx > 0:
        return rec.cum_tx / rec.cum_rx
    return rec.T_dr


def path_eval(rec: TrustRecord) -> float:
    if rec.cum_paths > 0:
        return 1.0 - rec.cum_bad_paths / rec.cum_paths
    return rec.T_tp


def compute_weights(
    scheme: WeightScheme,
    T: float,
    T_dr: float,
    T_tp: float,
    thr: float,
    rng=None,
    psi0_cap: float = 0.9,
    printed_denominator: bool = False,
) -> tuple[float, float, float]:
    """Return ``(psi0, psi1, psi2)`` for one trust step.

    ``psi0 = min(0.5 * thr / T, psi0_cap)``. The adaptive split is
    proportional to the two misbehavior rates ``1 - T_dr`` and ``1 - T_tp``;
    with both rates zero it falls back to an even split.

    ``printed_denominator`` switches the adaptive denominator to
    ``2 - T_dr + T_tp``; that variant does not sum to one and is kept only
    for comparison runs.
    """
    if not T > 0:
        raise DomainError(f"trust must be positive, got {T}")
    psi0 = min(0.5 * thr / T, psi0_cap)
    rest = 1.0 - psi0
    if scheme is WeightScheme.ADAPTIVE:
        a, b = 1.0 - T_dr, 1.0 - T_tp
        denom = (2.0 - T_dr + T_tp) if printed_denominator else (a + b)
        if denom <= 0.0 or (a == 0.0 and b == 0.0):
            psi1 = psi2 = rest / 2.0
        else:
            psi1 = rest * a / denom
            psi2 = rest * b / denom
            if not printed_denominator:
                psi2 = rest - psi1
    elif scheme is WeightScheme.AVERAGE:
        psi1 = psi2 = rest / 2.0
    elif scheme is WeightScheme.RANDOM:
        if rng is None:
            raise ValueError("random weights need an rng")
        psi1 = float(rng.uniform(0.2 * rest, 0.8 * rest))
        psi2 = rest - psi1
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    return psi0, psi1, psi2


def update_trust(rec: TrustRecord, weights: tuple[float, float, float], thr: float, slot: int | None = None) -> TrustRecord:
    """Combine prior trust and behavior scores; flag below ``thr``.

    Flags are sticky: once flagged a node stays flagged.
    """
    psi0, psi1, psi2 = weights
    t_new = psi0 * rec.T + psi1 * rec.T_dr + psi2 * rec.T_tp
    t_new = min(max(t_new, 0.0), 1.0)
    flagged, flag_slot = rec.flagged, rec.flag_slot
    if t_new < thr and not flagged:
        flagged, flag_slot = True, slot
    return replace(rec, T=t_new, flagged=flagged, flag_slot=flag_slot)


def detection_step(history: Sequence[float], thr: float, start: int = 1) -> int:
    """First step index whose trust is below ``thr``; ``NOT_DETECTED`` otherwise.

    ``history[k]`` is the trust at step ``start + k``.
    """
    for k, t in enumerate(history):
        if t < thr:
            return start + k
    return NOT_DETECTED


def apply_report(rec: TrustRecord, report: BehaviorReport) -> TrustRecord:
    k = report.kind
    if isinstance(k, Delivery):
        return replace(rec, cum_rx=rec.cum_rx + k.rx, cum_tx=rec.cum_tx + k.tx)
    return replace(rec, cum_paths=rec.cum_paths + k.total, cum_bad_paths=rec.cum_bad_paths + k.bad)


class TrustTable:
    """Trust state for every node, advanced one step at a time.

    Only committed reports should be fed to :meth:`fold`.
    """

    def __init__(self, n: int, thr: float = 0.8, scheme: WeightScheme = WeightScheme.ADAPTIVE,
                 rng=None, psi0_cap: float = 0.9, printed_denominator: bool = False):
        self.thr = thr
        self.scheme = scheme
        self.rng = rng
        self.psi0_cap = psi0_cap
        self.printed_denominator = printed_denominator
        self.records = {i: TrustRecord(node=i) for i in range(n)}
        self.history: dict[int, list[float]] = {i: [] for i in range(n)}

    def __getitem__(self, i: int) -> TrustRecord:
        return self.records[i]

    def values(self) -> dict[int, float]:
        return {i: r.T for i, r in self.records.items()}

    def flagged(self) -> set[int]:
        return {i for i, r in self.records.items() if r.flagged}

    def fold(self, reports: Iterable[BehaviorReport]) -> None:
        for rep in reports:
            if rep.subject in self.records:
                self.records[rep.subject] = apply_report(self.records[rep.subject], rep)

    def step(self, slot: int) -> set[int]:
        """One trust iteration for all nodes; returns newly flagged ids."""
        newly = set()
        for i in sorted(self.records):
            rec = self.records[i]
            rec = replace(rec, T_dr=delivery_rate_eval(rec), T_tp=path_eval(rec))
            w = compute_weights(self.scheme, rec.T, rec.T_dr, rec.T_tp, self.thr, self.rng,
                                self.psi0_cap, self.printed_denominator)
            new = update_trust(rec, w, self.thr, slot)
            if new.flagged and not rec.flagged:
                newly.add(i)
            self.records[i] = new
            self.history[i].append(new.T)
        return newly

    def rows(self, slot: int) -> list[tuple]:
        return [(i, slot, r.T, r.T_dr, r.T_tp, int(r.flagged)) for i, r in sorted(self.records.items())]
