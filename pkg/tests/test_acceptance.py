"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the verdict lines
inline; they are printed with capture disabled either way. Criteria 2 and 8
take minutes; the rest take seconds.
"""

import itertools
import logging
import time
from collections import defaultdict

import numpy as np
import pytest

from conftest import ladder_config
from uavtrust.adversary import AttackConfig
from uavtrust.channel import ChannelParams, EnergyParams, hover_power, link_rate, path_loss
from uavtrust.consensus.bench import liveness_run, safety_schedule
from uavtrust.consensus.replica import (quorum_commit, quorum_prepare, rotation_invite_quorum,
                                        rotation_remove_quorum)
from uavtrust.geometry import SlotConfig
from uavtrust.marl.agent import AgentHyper
from uavtrust.marl.env import MarlRunner
from uavtrust.marl.nn import Mlp, gradient_check
from uavtrust.oracle import ShortestDelayPolicy, oracle_shortest_delay
from uavtrust.traffic import validate_flow
from uavtrust.trust import WeightScheme, compute_weights, update_trust, TrustRecord
from uavtrust.trustbench import GRID, TrustBenchConfig, run_trust_bench
from uavtrust.world import World, WorldConfig

log = logging.getLogger(__name__)


@pytest.fixture
def verdict(capsys):
    def report(number: int, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\nCRITERION {number}: {'PASS' if ok else 'FAIL'} ({detail})")
        assert ok, detail

    return report


# 1 ----------------------------------------------------------------------


def test_criterion_1_weight_normalization(verdict):
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    n = 100_000
    T = rng.uniform(1e-9, 1.0, n)
    T_dr = rng.uniform(0.0, 1.0, n)
    T_tp = rng.uniform(0.0, 1.0, n)
    thr = rng.uniform(0.05, 1.0, n)
    # exercise the boundary cases too
    T_dr[:1000] = 1.0
    T_tp[500:1500] = 1.0
    worst = 0.0
    draw = np.random.default_rng(7)
    for scheme in WeightScheme:
        for k in range(n):
            w = compute_weights(scheme, T[k], T_dr[k], T_tp[k], thr[k], draw)
            worst = max(worst, abs(w[0] + w[1] + w[2] - 1.0))
    fixed = []
    for scheme in (WeightScheme.ADAPTIVE, WeightScheme.AVERAGE):
        for t in (0.3, 0.8, 1.0):
            rec = TrustRecord(0, T=1.0, T_dr=1.0, T_tp=1.0)
            w = compute_weights(scheme, 1.0, 1.0, 1.0, t, draw)
            fixed.append(update_trust(rec, w, t).T)
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-12 and all(v == 1.0 for v in fixed) and elapsed < 5.0
    verdict(1, ok, f"max |sum-1| = {worst:.2e}, fixed point {set(fixed)}, {elapsed:.2f} s")


# 2 ----------------------------------------------------------------------


def test_criterion_2_detection_ordering(verdict):
    cfg = TrustBenchConfig(n_nodes=20, f=2, thr=0.8, seeds=30)
    med = run_trust_bench(cfg)["median"]
    ada, avg, rnd = (med[s.value] for s in (WeightScheme.ADAPTIVE, WeightScheme.AVERAGE, WeightScheme.RANDOM))
    cells = list(itertools.product(GRID, GRID))
    good = sum(ada[c] <= avg[c] and ada[c] <= rnd[c] for c in cells)
    lo, hi = (0.5, 0.5), (0.9, 0.9)
    ends = ada[lo] == min(ada.values()) and ada[hi] == max(ada.values())
    grid = " ".join(f"{c}:{ada[c]:g}/{avg[c]:g}/{rnd[c]:g}" for c in cells)
    verdict(2, good >= 8 and ends, f"{good}/9 cells adaptive best, extremes ok={ends}; adaptive/average/random {grid}")


# 3 ----------------------------------------------------------------------


def test_criterion_3_consensus_safety_and_liveness(verdict):
    quorums = all(
        quorum_prepare(n) == 2 * n and quorum_commit(n) == 2 * n + 1
        and rotation_remove_quorum(n) == 2 * n and rotation_invite_quorum(n) == 2 * n + 1
        for n in (1, 2, 3)
    )
    unsafe = [s for s in range(1000) if not safety_schedule(s, n=1, byzantine_leader=(s % 2 == 0)).safe]
    live = [liveness_run(s, n=1, crashes=1) for s in range(20)]
    live += [liveness_run(100 + s, n=2, crashes=2) for s in range(5)]
    missing = sum(r.submitted - r.committed for r in live)
    worst = max(r.max_latency for r in live)
    ok = quorums and not unsafe and missing == 0 and 0 < worst <= 10
    verdict(3, ok, f"quorums ok={quorums}, unsafe schedules {len(unsafe)}/1000, uncommitted {missing}, "
                   f"worst latency {worst} slots")


# 4 ----------------------------------------------------------------------


def _rotation_world(f: int, n: int, seed: int) -> World:
    cfg = WorldConfig(n_nodes=12, n_demands=60, arrival_window=30, attack=AttackConfig(f=f, p1=0.5, p2=0.5),
                      consensus_n=n, rotation_period=5,
                      slot=SlotConfig(d_max=450.0, q=6, horizon=30, arena_x=(0, 500), arena_y=(0, 500)))
    w = World(cfg, seed)
    w.run(ShortestDelayPolicy())
    return w


def test_criterion_4_rotation(verdict):
    traces, problems = 0, []
    for f, n in ((1, 1), (2, 2)):
        for seed in range(3):
            w = _rotation_world(f, n, seed)
            for tr in w.ledger.rotations:
                traces += 1
                where = f"f={f} seed={seed} slot={tr.slot}"
                if len(tr.members_after) != 3 * n + 1:
                    problems.append(f"{where}: {len(tr.members_after)} members")
                if tr.removed is None:
                    continue
                if not (tr.trust_of_removed < w.cfg.thr or tr.trust_of_removed == tr.min_member_trust):
                    problems.append(f"{where}: removed {tr.removed} is neither flagged nor minimum")
                if tr.invites_received < 2 * tr.f + 1 or tr.updates_received < 2 * tr.f + 1:
                    problems.append(f"{where}: {tr.invites_received} invites, {tr.updates_received} updates")
                if tr.f != f:
                    problems.append(f"{where}: rotation ran with f={tr.f}")
    verdict(4, traces > 0 and not problems, f"{traces} rotations traced; issues: {problems[:3] or 'none'}")


# 5 ----------------------------------------------------------------------


def test_criterion_5_numerical_kernels(verdict):
    rng = np.random.default_rng(55)
    errs = []
    for _ in range(20):
        net = Mlp.init([6, int(rng.integers(4, 12)), int(rng.integers(4, 12)), 3], rng)
        for b in net.biases:
            b[:] = rng.normal(0, 0.5, b.shape)
        obs = rng.normal(size=(8, 6))
        errs.append(gradient_check(net, obs, rng.integers(0, 3, 8), rng.normal(size=8)))
    ep, ch = EnergyParams(), ChannelParams()
    hover = hover_power(0.0, ep)
    # worked spot values at d = 100 m, 2.4 GHz, 2 MHz, 0.1 W and noise 1e-14 W
    pl_ref, rate_ref = 1.011e8, 33.2e6
    rel_pl = abs(path_loss(100.0, ch) / pl_ref - 1)
    rel_rate = abs(link_rate(100.0, ch) / rate_ref - 1)
    ok = max(errs) < 1e-4 and abs(hover - 20.7101) <= 1e-4 and rel_pl < 1e-3 and rel_rate < 1e-3
    verdict(5, ok, f"grad rel err {max(errs):.2e}, hover {hover:.6f} W, path loss rel {rel_pl:.1e}, rate rel {rel_rate:.1e}")


# 6 ----------------------------------------------------------------------


def _recompute_reward(world: World) -> float:
    hops = sorted((h for d in world.demands.values() for h in d.path), key=lambda h: h.seq)
    by_slot = defaultdict(list)
    for h in hops:
        by_slot[h.slot].append(h)
    total = 0.0
    for slot in sorted(by_slot):
        part = 0.0
        for h in by_slot[slot]:
            part += min(h.queue_delay + h.tx_delay, world.cfg.t_one_max)
        total += -10.0 * part
    return total


def test_criterion_6_reward_bookkeeping(verdict):
    cfg = WorldConfig(n_nodes=10, n_demands=12, arrival_window=6, attack=AttackConfig(f=2, p1=0.5, p2=0.5),
                      consensus_n=1, slot=SlotConfig(d_max=450.0, q=6, horizon=12, arena_x=(0, 600), arena_y=(0, 600)))
    runner = MarlRunner(cfg, AgentHyper(batch=16, hidden=32), seed=6)
    mismatches, episodes = [], 0
    for k in range(40):
        res = runner.run_episode(k, eps=1.0 - k / 40, train=True, keep_world=True)
        episodes += 1
        if res.reward != _recompute_reward(res.world):
            mismatches.append(k)
    verdict(6, not mismatches, f"{episodes} episodes, bitwise mismatches at {mismatches or 'none'}")


# 7 ----------------------------------------------------------------------

FIXTURE_EPISODES = 1000


def _fixture_oracle() -> float:
    w = World(ladder_config(), 0)
    return float(np.mean([oracle_shortest_delay(w.snapshot, d)[1] for d in w.demands.values()]))


def test_criterion_7_fixture_convergence(verdict):
    oracle = _fixture_oracle()
    hyper = AgentHyper(lr=1e-4, eps_end=0.0, batch=32)
    close, wins, lines = 0, 0, []
    for seed in range(5):
        tails = {}
        for double in (True, False):
            r = MarlRunner(ladder_config(), hyper, seed, double=double)
            res = r.train(FIXTURE_EPISODES)
            tails[double] = float(np.mean([x.reward for x in res[-100:]]))
            if double:
                delay = r.evaluate().summary["mean_delay"]
                close += abs(delay - oracle) <= 0.05 * oracle
                lines.append(f"s{seed} {delay:.6g}")
        wins += tails[True] >= tails[False]
    ok = close == 5 and wins >= 3
    verdict(7, ok, f"oracle {oracle:.6g}; MADDQN delays {', '.join(lines)}; within 5%: {close}/5; "
                   f"MADDQN tail reward >= MADQN on {wins}/5 seeds")


# 8 ----------------------------------------------------------------------

ABLATION_SEEDS = 10
ABLATION_EPISODES = 200
ABLATION_EVAL = 20


def ablation_config(btmm: bool) -> WorldConfig:
    return WorldConfig(n_nodes=10, n_demands=20, arrival_window=15, attack=AttackConfig(f=2, p1=0.5, p2=0.5),
                       btmm=btmm, consensus_n=2,
                       slot=SlotConfig(d_max=450.0, q=6, horizon=20, arena_x=(0, 600), arena_y=(0, 600)))


def _post_convergence_delay(btmm: bool, seed: int) -> float:
    r = MarlRunner(ablation_config(btmm), AgentHyper(lr=1e-3, batch=32), seed, double=True)
    r.train(ABLATION_EPISODES)
    return float(np.mean([r.evaluate(ABLATION_EPISODES + k, keep_world=False).summary["mean_delay"]
                          for k in range(ABLATION_EVAL)]))


def test_criterion_8_btmm_ablation(verdict):
    with_btmm, without = [], []
    for seed in range(ABLATION_SEEDS):
        with_btmm.append(_post_convergence_delay(True, seed))
        without.append(_post_convergence_delay(False, seed))
        log.info("seed %d: btmm %.4f no-btmm %.4f", seed, with_btmm[-1], without[-1])
    a, b = float(np.mean(with_btmm)), float(np.mean(without))
    gain = 1.0 - a / b
    verdict(8, gain >= 0.10, f"mean delay with BTMM {a:.4f} s, without {b:.4f} s, reduction {100 * gain:.1f}% "
                             f"over {ABLATION_SEEDS} seeds")


# 9 ----------------------------------------------------------------------


def _fuzz_policy(rng):
    def policy(world, node, demand):
        nb = world.snapshot.neighbors(node)
        if not nb or rng.random() < 0.2:
            return None
        return int(rng.choice(nb))
    return policy


def test_criterion_9_flow_and_queue_invariants(verdict):
    rng = np.random.default_rng(99)
    slots, bad_flow, bad_queue, episode = 0, 0, 0, 0
    while slots < 10_000:
        cfg = WorldConfig(n_nodes=int(rng.integers(4, 16)), n_demands=int(rng.integers(5, 40)),
                          arrival_window=int(rng.integers(1, 20)), attack=AttackConfig(f=0), btmm=False,
                          c_max=int(rng.integers(3, 50)), slot=SlotConfig(horizon=50))
        w = World(cfg, seed=episode)
        policy = ShortestDelayPolicy() if episode % 3 == 0 else _fuzz_policy(rng)
        w.run(policy)
        events = [e for lg in w.logs for e in lg.events]
        bad_flow += bool(validate_flow(events, w.demands))
        for lg in w.logs:
            bad_queue += sum(now != prev + rx - tx for _, prev, rx, tx, now in lg.queue_check)
        slots += w.slot
        episode += 1
    verdict(9, bad_flow == 0 and bad_queue == 0,
            f"{slots} slots over {episode} episodes, flow violations {bad_flow}, queue identity violations {bad_queue}")
