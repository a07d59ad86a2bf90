"""Command-line entry point.

Exit codes: 0 success, 2 usage error, 3 configuration error, 4 simulation or
protocol error, 5 I/O error, 1 a benchmark ran but its check failed.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from .errors import ConfigError, UavTrustError

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_CONFIG, EXIT_RUNTIME, EXIT_IO = 0, 1, 2, 3, 4, 5

log = logging.getLogger("uavtrust")


class UsageError(Exception):
    pass


def _load(args):
    from .harness.config import ExperimentConfig, load_config

    if getattr(args, "config", None) is None:
        cfg = ExperimentConfig()
    else:
        if not Path(args.config).is_file():
            raise UsageError(f"config file not found: {args.config}")
        cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg = dataclasses.replace(cfg, seeds=[args.seed])
    return cfg


def _out(args, cfg) -> Path:
    from .harness.experiment import output_dir

    return Path(args.out) if getattr(args, "out", None) else output_dir(cfg)


def cmd_simulate(args) -> int:
    from .harness.experiment import run_experiment

    cfg = _load(args)
    path = run_experiment(cfg, _out(args, cfg), checkpoints=args.checkpoints)
    print(f"metrics written to {path}")
    return EXIT_OK


def cmd_train(args) -> int:
    from .harness.experiment import run_seed
    from .harness.metrics import emit_metrics

    cfg = _load(args)
    out = _out(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    seed = cfg.seeds[0]
    ckpt = Path(args.checkpoint) if args.checkpoint else out / f"checkpoint-s{seed}.txt"
    _, rows = run_seed(cfg, seed, ckpt)
    emit_metrics(rows, out / f"train-s{seed}.csv")
    print(f"checkpoint written to {ckpt}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    from .harness.metrics import emit_metrics, row_from_summary
    from .marl.agent import load_checkpoint
    from .marl.env import MarlRunner

    cfg = _load(args)
    if not Path(args.checkpoint).is_file():
        raise UsageError(f"checkpoint not found: {args.checkpoint}")
    _, nets = load_checkpoint(args.checkpoint)
    seed = cfg.seeds[0]
    runner = MarlRunner(cfg.world(), cfg.rl, seed, double=cfg.double)
    for i, net in nets.items():
        runner.agents[i].online.load_from(net)
        runner.agents[i].sync_target()
    rows = []
    for k in range(args.episodes):
        res = runner.evaluate(k, keep_world=False)
        rows.append(row_from_summary(f"{cfg.algorithm}-s{seed}", seed, k, "eval", res.summary))
        print(f"episode {k}: reward {res.reward:.6g} mean delay {res.summary['mean_delay']:.6g} s")
    out = _out(args, cfg)
    emit_metrics(rows, out / f"eval-s{seed}.csv")
    return EXIT_OK


def cmd_oracle(args) -> int:
    from .errors import Unreachable
    from .oracle import oracle_shortest_delay
    from .world import World

    cfg = _load(args)
    w = World(cfg.world(), cfg.seeds[0])
    exclude = w.compromised | w.flagged
    print("demand\tsource\tdestination\tdelay_s\tpath")
    for d in w.demands.values():
        try:
            path, cost = oracle_shortest_delay(w.snapshot, d, exclude)
            print(f"{d.id}\t{d.source}\t{d.destination}\t{cost:.9g}\t{'-'.join(map(str, path))}")
        except Unreachable:
            print(f"{d.id}\t{d.source}\t{d.destination}\tunreachable\t")
    return EXIT_OK


def cmd_trust_bench(args) -> int:
    from .trustbench import TrustBenchConfig, format_grid, run_trust_bench

    cfg = _load(args)
    tb = TrustBenchConfig(n_nodes=cfg.n_nodes, f=cfg.attack.f, thr=cfg.trust.thr, seeds=args.seeds,
                          base_seed=cfg.seeds[0], horizon=args.horizon, world=cfg.world())
    result = run_trust_bench(tb)
    text = format_grid(result, tb.grid)
    print(text, end="")
    out = _out(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    (out / "trust_bench.txt").write_text(text)
    return EXIT_OK


def cmd_consensus_bench(args) -> int:
    from .consensus.bench import liveness_run, safety_schedule

    base = args.seed if args.seed is not None else 0
    unsafe = 0
    for k in range(args.schedules):
        res = safety_schedule(base + k, n=args.n, byzantine_leader=(k % 2 == 0), drop_prob=args.drop)
        unsafe += not res.safe
    print(f"safety: {args.schedules} schedules, {unsafe} with conflicting commits")
    worst = 0
    missing = 0
    for k in range(args.liveness_runs):
        lr = liveness_run(base + k, n=args.n, crashes=args.n, drop_prob=args.drop)
        worst = max(worst, lr.max_latency)
        missing += lr.submitted - lr.committed
    print(f"liveness: {args.liveness_runs} runs, {missing} uncommitted, worst latency {worst} slots")
    return EXIT_OK if unsafe == 0 and missing == 0 and worst <= 10 else EXIT_CHECK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="uavtrust", description="Trusted routing simulator with trust ledger and MARL routing.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required: bool):
        sp.add_argument("config", nargs=None if config_required else "?", help="YAML experiment config")
        sp.add_argument("--seed", type=int, help="override the configured seeds with one seed")
        sp.add_argument("--out", help="output directory (default: config 'output' or $UAVTRUST_OUTPUT_DIR)")

    sp = sub.add_parser("simulate", help="full run: train and evaluate for every seed")
    common(sp, True)
    sp.add_argument("--checkpoints", action="store_true", help="also save per-seed checkpoints")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("train", help="train one seed and save a checkpoint")
    common(sp, True)
    sp.add_argument("--checkpoint", help="checkpoint path")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("evaluate", help="greedy evaluation from a checkpoint")
    common(sp, True)
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--episodes", type=int, default=1)
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("oracle", help="shortest-delay audit of the first-slot demands")
    common(sp, True)
    sp.set_defaults(func=cmd_oracle)

    sp = sub.add_parser("trust-bench", help="median detection steps over the (p1, p2) grid")
    common(sp, False)
    sp.add_argument("--seeds", type=int, default=20, help="seeds per grid cell")
    sp.add_argument("--horizon", type=int, default=40)
    sp.set_defaults(func=cmd_trust_bench)

    sp = sub.add_parser("consensus-bench", help="consensus safety and liveness under injected faults")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--n", type=int, default=1)
    sp.add_argument("--schedules", type=int, default=1000)
    sp.add_argument("--liveness-runs", type=int, default=20)
    sp.add_argument("--drop", type=float, default=0.1)
    sp.set_defaults(func=cmd_consensus_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except UavTrustError as exc:
        print(f"run error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
