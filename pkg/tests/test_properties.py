"""Randomized property checks."""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from uavtrust.adversary import link_weight, node_importance
from uavtrust.geometry import select_links
from uavtrust.harness.metrics import MetricsRow, emit_metrics, read_metrics
from uavtrust.marl.agent import masked_argmax
from uavtrust.traffic import Demand, FlowEvent, update_queue_length, validate_flow
from uavtrust.trust import TrustRecord, WeightScheme, compute_weights, update_trust

unit = st.floats(0.0, 1.0, allow_nan=False)
positive_unit = st.floats(1e-6, 1.0, allow_nan=False)


@given(T=positive_unit, T_dr=unit, T_tp=unit, thr=st.floats(0.05, 1.0), scheme=st.sampled_from(list(WeightScheme)),
       seed=st.integers(0, 2**32 - 1))
def test_weights_form_a_simplex(T, T_dr, T_tp, thr, scheme, seed):
    w = compute_weights(scheme, T, T_dr, T_tp, thr, np.random.default_rng(seed))
    assert abs(sum(w) - 1.0) <= 1e-12
    assert all(x >= 0 for x in w)


@given(T=positive_unit, T_dr=unit, T_tp=unit, bump=st.floats(0.0, 1.0))
def test_trust_monotone_in_delivery(T, T_dr, T_tp, bump):
    hi = min(1.0, T_dr + bump)
    w = (0.4, 0.3, 0.3)
    lo_rec = update_trust(TrustRecord(0, T=T, T_dr=T_dr, T_tp=T_tp), w, 0.8)
    hi_rec = update_trust(TrustRecord(0, T=T, T_dr=hi, T_tp=T_tp), w, 0.8)
    assert 0.0 <= lo_rec.T <= hi_rec.T <= 1.0


@given(trust=st.dictionaries(st.integers(1, 30), unit, min_size=0, max_size=20), q=st.integers(1, 8),
       thr=unit, data=st.data())
def test_links_are_trusted_nearest(trust, q, thr, data):
    dists = {k: data.draw(st.floats(1.0, 500.0)) for k in trust}
    chosen = select_links(0, trust.keys(), trust, q, thr, dists)
    eligible = [k for k in trust if trust[k] >= thr]
    assert len(chosen) == min(q, len(eligible))
    assert all(trust[k] >= thr for k in chosen)
    rest = [k for k in eligible if k not in chosen]
    if chosen and rest:
        assert max((dists[k], k) for k in chosen) < min((dists[k], k) for k in rest)


@given(c=st.integers(0, 50), rx=st.integers(0, 50), tx=st.integers(0, 50))
def test_queue_identity(c, rx, tx):
    total = c + rx - tx
    if 0 <= total <= 50:
        assert update_queue_length(c, rx, tx) == total
    else:
        try:
            update_queue_length(c, rx, tx)
        except Exception as exc:
            assert type(exc).__name__ == "InvariantBreach"
        else:
            raise AssertionError("expected a breach")


@st.composite
def walks(draw):
    n = draw(st.integers(3, 8))
    src, dst = draw(st.lists(st.integers(0, n - 1), min_size=2, max_size=2, unique=True))
    events, holder, slot = [], src, draw(st.integers(0, 5))
    for _ in range(draw(st.integers(0, 10))):
        nxt = draw(st.integers(0, n - 1))
        if nxt == dst:
            break
        events.append(FlowEvent(slot, 0, holder, nxt))
        holder, slot = nxt, slot + 1
    events.append(FlowEvent(slot, 0, holder, dst))
    return events, Demand(0, src, dst, 1.0, delivered=True)


@given(walks())
def test_single_path_walks_validate(walk):
    events, dem = walk
    assert validate_flow(events, {0: dem}) == []


@given(walks(), st.integers(0, 7))
def test_duplicated_event_is_caught(walk, extra):
    events, dem = walk
    ev = events[0]
    bad = events + [FlowEvent(ev.slot, 0, ev.frm, (ev.to + 1 + extra) % 9)]
    assert validate_flow(bad, {0: dem}) != []


@given(q=st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=10), data=st.data())
def test_argmax_respects_mask(q, data):
    mask = np.array(data.draw(st.lists(st.booleans(), min_size=len(q), max_size=len(q))))
    if not mask.any():
        mask[data.draw(st.integers(0, len(q) - 1))] = True
    a = masked_argmax(np.array(q), mask)
    assert mask[a]
    assert q[a] == max(v for v, m in zip(q, mask) if m)


@st.composite
def graphs(draw):
    n = draw(st.integers(2, 8))
    edges = draw(st.sets(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)).filter(lambda e: e[0] < e[1])))
    adj = {i: [] for i in range(n)}
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    return adj


@given(graphs())
def test_importance_bounds(adj):
    for i in adj:
        lam = node_importance(i, adj).lam
        assert lam >= len(adj[i]) - 1e-12
        for j in adj[i]:
            assert link_weight(i, j, adj) == link_weight(j, i, adj) >= 0


@settings(max_examples=30, deadline=None)
@given(vals=st.lists(st.floats(-1e12, 1e12, allow_nan=False), min_size=1, max_size=5))
def test_metric_floats_roundtrip(tmp_path_factory, vals):
    path = tmp_path_factory.mktemp("m") / "m.csv"
    rows = [MetricsRow("r", 0, k, "train", v, v, v, v, v, "", 0, 0, 0, 0) for k, v in enumerate(vals)]
    back = read_metrics(emit_metrics(rows, path))
    for r, v in zip(back, vals):
        assert r.episode_reward == float(format(v, ".9g"))
