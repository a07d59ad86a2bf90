"""Per-episode metrics rows and their delimited-text serialization."""

from __future__ import annotations

import csv
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Iterable

FLOAT_FORMAT = ".9g"


@dataclass
class MetricsRow:
    run_id: str
    seed: int
    episode: int
    phase: str
    episode_reward: float
    mean_delay: float
    throughput: float
    mean_queue: float
    energy: float
    detection_steps: str
    commits: int
    flagged: int
    delivered: int
    demands: int


HEADER = tuple(f.name for f in fields(MetricsRow))


def row_from_summary(run_id: str, seed: int, episode: int, phase: str, summary: dict) -> MetricsRow:
    det = ";".join(f"{k}:{v}" for k, v in sorted(summary["detection"].items()))
    return MetricsRow(run_id, seed, episode, phase, summary["episode_reward"], summary["mean_delay"],
                      summary["throughput"], summary["mean_queue"], summary["energy"], det,
                      summary["commits"], summary["flagged"], summary["delivered"], summary["demands"])


def _fmt(v) -> str:
    if isinstance(v, float):
        return format(v, FLOAT_FORMAT)
    return str(v)


def emit_metrics(rows: Iterable[MetricsRow], path: str | Path) -> Path:
    """Write a comma-separated file with a fixed header; floats keep 9 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HEADER)
        for r in rows:
            w.writerow([_fmt(getattr(r, name)) for name in HEADER])
    return path


def read_metrics(path: str | Path) -> list[MetricsRow]:
    types = {f.name: f.type for f in fields(MetricsRow)}
    conv = {"int": int, "float": float, "str": str}
    out = []
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != HEADER:
            raise ValueError(f"unexpected header {header}")
        for rec in reader:
            out.append(MetricsRow(**{k: conv[types[k]](v) for k, v in zip(header, rec)}))
    return out
