"""Run a configured experiment: train per seed, then evaluate greedily, and write outputs."""

from __future__ import annotations

import logging
import os
from pathlib import Path

from ..marl.agent import save_checkpoint
from ..marl.env import MarlRunner
from .config import ExperimentConfig, dump_config
from .metrics import MetricsRow, emit_metrics, row_from_summary

log = logging.getLogger(__name__)

OUTPUT_ENV = "UAVTRUST_OUTPUT_DIR"


def output_dir(cfg: ExperimentConfig) -> Path:
    """Configured output directory, overridable by environment variable."""
    return Path(os.environ.get(OUTPUT_ENV) or cfg.output)


def run_seed(cfg: ExperimentConfig, seed: int, checkpoint: Path | None = None) -> tuple[MarlRunner, list[MetricsRow]]:
    runner = MarlRunner(cfg.world(), cfg.rl, seed, double=cfg.double)
    run_id = f"{cfg.algorithm}-s{seed}"
    rows: list[MetricsRow] = []

    def on_episode(res):
        rows.append(row_from_summary(run_id, seed, res.episode, "train", res.summary))

    runner.train(cfg.episodes, on_episode)
    for k in range(cfg.eval_episodes):
        res = runner.evaluate(cfg.episodes + k, keep_world=False)
        rows.append(row_from_summary(run_id, seed, cfg.episodes + k, "eval", res.summary))
    if checkpoint is not None:
        save_checkpoint(checkpoint, runner.agents, cfg.rl, {"seed": seed, "algorithm": cfg.algorithm})
    log.info("%s done: %d rows", run_id, len(rows))
    return runner, rows


def run_experiment(cfg: ExperimentConfig, out: str | Path | None = None, checkpoints: bool = False) -> Path:
    """Write ``config.resolved.yaml`` and ``metrics.csv`` (one row per episode and seed)."""
    out = Path(out) if out is not None else output_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    dump_config(cfg, out / "config.resolved.yaml")
    rows: list[MetricsRow] = []
    for seed in cfg.seeds:
        ckpt = out / f"checkpoint-s{seed}.txt" if checkpoints else None
        _, r = run_seed(cfg, seed, ckpt)
        rows.extend(r)
    return emit_metrics(rows, out / "metrics.csv")
