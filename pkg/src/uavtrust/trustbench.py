"""Detection-time benchmark over the (p1, p2) misbehavior grid for each weight scheme."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .adversary import AttackConfig
from .geometry import SlotConfig
from .oracle import ShortestDelayPolicy
from .trust import WeightScheme
from .world import World, WorldConfig

log = logging.getLogger(__name__)

GRID = (0.5, 0.7, 0.9)


@dataclass
class TrustBenchConfig:
    n_nodes: int = 20
    f: int = 2
    thr: float = 0.8
    horizon: int = 40
    demands_per_slot: int = 8
    seeds: int = 30
    base_seed: int = 0
    grid: tuple[float, ...] = GRID
    schemes: tuple[WeightScheme, ...] = (WeightScheme.ADAPTIVE, WeightScheme.AVERAGE, WeightScheme.RANDOM)
    world: WorldConfig = field(default_factory=WorldConfig)


def detection_time(cfg: TrustBenchConfig, p1: float, p2: float, scheme: WeightScheme, seed: int) -> int:
    """Steps until every compromised node is flagged; ``horizon + 1`` when some never is."""
    wc = replace(
        cfg.world,
        n_nodes=cfg.n_nodes,
        n_demands=cfg.demands_per_slot * cfg.horizon,
        arrival_window=cfg.horizon,
        attack=AttackConfig(f=cfg.f, p1=p1, p2=p2),
        thr=cfg.thr,
        scheme=scheme,
        btmm=True,
        slot=replace(cfg.world.slot, horizon=cfg.horizon),
    )
    w = World(wc, seed)
    policy = ShortestDelayPolicy()
    while not w.done:
        w.step(policy)
        if w.compromised and w.compromised <= w.flagged:
            break
    steps = w.detection_steps()
    if not steps or any(v < 0 for v in steps.values()):
        return cfg.horizon + 1
    return max(steps.values())


def run_trust_bench(cfg: TrustBenchConfig) -> dict:
    """Median detection steps per scheme and grid cell.

    Returns ``{"median": {scheme: {(p1, p2): value}}, "raw": ...}``.
    """
    raw: dict[str, dict[tuple[float, float], list[int]]] = {}
    for scheme in cfg.schemes:
        cells = {}
        for p1 in cfg.grid:
            for p2 in cfg.grid:
                cells[(p1, p2)] = [detection_time(cfg, p1, p2, scheme, cfg.base_seed + s) for s in range(cfg.seeds)]
                log.info("%s p1=%s p2=%s median=%s", scheme.value, p1, p2, np.median(cells[(p1, p2)]))
        raw[scheme.value] = cells
    median = {s: {c: float(np.median(v)) for c, v in cells.items()} for s, cells in raw.items()}
    return {"median": median, "raw": raw}


def format_grid(result: dict, grid=GRID) -> str:
    lines = []
    for scheme, cells in result["median"].items():
        lines.append(f"[{scheme}] rows p1, columns p2")
        lines.append("p1\\p2\t" + "\t".join(str(p) for p in grid))
        for p1 in grid:
            lines.append(f"{p1}\t" + "\t".join(f"{cells[(p1, p2)]:g}" for p2 in grid))
    return "\n".join(lines) + "\n"
