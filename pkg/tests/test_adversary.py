import itertools

import numpy as np
import pytest

from uavtrust.adversary import (AttackConfig, Decision, ImportanceScore, importance_scores, link_weight,
                                malicious_forward_decision, node_importance, select_attack_targets)

CYCLE4 = {0: [1, 3], 1: [0, 2], 2: [1, 3], 3: [2, 0]}
TRIANGLE = {0: [1, 2], 1: [0, 2], 2: [0, 1]}
STAR = {0: [1, 2, 3], 1: [0], 2: [0], 3: [0]}


def brute_link_weight(adj, i, j):
    # count common neighbors and the "open" pairs (a, b), a in N(i)\{j}, b in N(j)\{i}, a != b, not shared
    ni, nj = set(adj[i]) - {j}, set(adj[j]) - {i}
    m = len(ni & nj)
    z = sum(1 for a, b in itertools.product(ni - nj, nj - ni) if a != b)
    return z * 2.0 / (m + 2)


@pytest.mark.parametrize("adj", [CYCLE4, TRIANGLE, STAR])
def test_link_weight_matches_enumeration(adj):
    for i in adj:
        for j in adj[i]:
            assert link_weight(i, j, adj) == pytest.approx(brute_link_weight(adj, i, j))


def test_link_weights_by_hand():
    assert link_weight(0, 1, CYCLE4) == 1.0
    assert link_weight(0, 1, TRIANGLE) == 0.0
    assert link_weight(0, 1, STAR) == 0.0


def test_importance_values():
    assert node_importance(0, CYCLE4).lam == pytest.approx(3.0)
    assert node_importance(0, TRIANGLE).lam == pytest.approx(2.0)
    assert node_importance(5, {5: []}).lam == 0.0


def test_target_selection():
    scores = [ImportanceScore(0, 1.0), ImportanceScore(1, 5.0), ImportanceScore(2, 3.0), ImportanceScore(3, 3.0)]
    assert select_attack_targets(scores, 0) == set()
    assert select_attack_targets(scores, 1) == {1}
    assert select_attack_targets(scores, 2) == {1, 2}
    assert select_attack_targets(scores, 1, already={1}) == {2}


def test_star_hub_ranked_first():
    assert select_attack_targets(importance_scores(STAR), 1) == {0}


def test_decisions_extremes():
    rng = np.random.default_rng(0)
    assert all(malicious_forward_decision(AttackConfig(p1=1, p2=1), rng) is Decision.CORRECT for _ in range(200))
    assert all(malicious_forward_decision(AttackConfig(p1=0, p2=1), rng) is Decision.DROP for _ in range(200))


def test_decision_frequencies():
    rng = np.random.default_rng(7)
    cfg = AttackConfig(p1=0.5, p2=0.5)
    draws = [malicious_forward_decision(cfg, rng) for _ in range(10_000)]
    drop = sum(d is Decision.DROP for d in draws) / len(draws)
    wrong = sum(d is Decision.WRONG_PATH for d in draws) / len(draws)
    assert abs(drop - 0.5) < 0.02
    assert abs(wrong - 0.25) < 0.02


def test_probability_bounds():
    with pytest.raises(ValueError):
        AttackConfig(p1=1.3)
