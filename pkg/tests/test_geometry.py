import math

import numpy as np
import pytest

from uavtrust.errors import SafetyViolation
from uavtrust.geometry import (NodeState, SlotConfig, advance, build_topology, candidate_neighbors, distance,
                               distance_matrix, place_nodes, select_links, step_mobility)


def states_at(points):
    return [NodeState(id=i, position=np.array(p, dtype=float), velocity=np.zeros(3)) for i, p in enumerate(points)]


def const_rate(d):
    return 1e6


class TestDistance:
    def test_pythagorean_triple(self):
        assert distance((0, 0, 0), (3, 4, 0)) == 5.0

    def test_vertical(self):
        assert distance((0, 0, 120), (0, 0, 140)) == 20.0

    def test_identity(self):
        a = (12.5, -3.0, 131.0)
        assert distance(a, a) == 0.0

    def test_matrix_matches_pairwise(self, rng):
        pts = rng.uniform(0, 100, size=(6, 3))
        m = distance_matrix(pts)
        for i in range(6):
            for j in range(6):
                assert m[i, j] == pytest.approx(math.dist(pts[i], pts[j]), abs=1e-9)


class TestCandidates:
    cfg = SlotConfig(d_max=300.0, d_min=10.0)

    def test_only_in_range(self):
        d = distance_matrix(np.array([[0, 0, 130], [100, 0, 130], [400, 0, 130]], dtype=float))
        assert candidate_neighbors(0, d, self.cfg) == {1}

    def test_boundary_inclusive(self):
        d = distance_matrix(np.array([[0, 0, 130], [300, 0, 130]], dtype=float))
        assert candidate_neighbors(0, d, self.cfg) == {1}

    def test_safety_violation(self):
        d = distance_matrix(np.array([[0, 0, 130], [5, 0, 130]], dtype=float))
        with pytest.raises(SafetyViolation):
            candidate_neighbors(0, d, self.cfg)


class TestSelectLinks:
    def test_trust_filter_then_nearest(self):
        trust = {1: 0.9, 2: 0.7, 3: 0.85}
        dists = {1: 50.0, 2: 10.0, 3: 80.0}
        assert set(select_links(0, {1, 2, 3}, trust, 2, 0.8, dists)) == {1, 3}

    def test_fewer_than_q(self):
        assert select_links(0, {4}, {4: 1.0}, 3, 0.8, {4: 10.0}) == (4,)

    def test_distance_tie_goes_to_lower_id(self):
        assert select_links(0, {5, 2}, None, 1, 0.8, {5: 100.0, 2: 100.0}) == (2,)

    def test_flagged_excluded(self):
        assert select_links(0, {1, 2}, None, 2, 0.8, {1: 1.0, 2: 2.0}, flagged={1}) == (2,)


class TestMobility:
    cfg = SlotConfig(arena_x=(0, 1500), arena_y=(0, 1500), arena_z=(120, 140))

    def test_straight_move(self):
        pos, vel = advance(np.array([0.0, 0.0, 130.0]), np.array([3.0, 0.0, 0.0]), 1.0, self.cfg)
        assert np.array_equal(pos, [3.0, 0.0, 130.0])
        assert np.array_equal(vel, [3.0, 0.0, 0.0])

    def test_zero_velocity(self):
        p0 = np.array([10.0, 20.0, 130.0])
        pos, _ = advance(p0, np.zeros(3), 1.0, self.cfg)
        assert np.array_equal(pos, p0)

    def test_reflection_at_wall(self):
        pos, vel = advance(np.array([1499.0, 5.0, 130.0]), np.array([3.0, 0.0, 0.0]), 1.0, self.cfg)
        assert pos[0] == pytest.approx(1498.0)
        assert vel[0] == -3.0

    def test_step_keeps_speed_and_bounds(self, rng):
        cfg = SlotConfig()
        st = place_nodes(12, cfg, rng)
        for _ in range(30):
            st = step_mobility(st, cfg, rng)
            for s in st:
                assert np.all(s.position >= cfg.lower) and np.all(s.position <= cfg.upper)
                assert np.linalg.norm(s.velocity) == pytest.approx(cfg.speed)
            d = distance_matrix(np.array([s.position for s in st]))
            assert d[np.triu_indices(12, 1)].min() >= cfg.d_min


class TestTopology:
    cfg = SlotConfig(d_max=300.0, q=2)

    def test_pair_link(self):
        snap = build_topology(states_at([(0, 0, 130), (100, 0, 130)]), {0: 1.0, 1: 1.0}, self.cfg, const_rate)
        assert snap.edges() == [(0, 1)]
        assert snap.rates[(0, 1)] == snap.rates[(1, 0)] == 1e6

    def test_flagged_endpoint(self):
        st = states_at([(0, 0, 130), (100, 0, 130)])
        st[1].is_malicious = True
        snap = build_topology(st, None, self.cfg, const_rate)
        assert snap.edges() == []

    def test_untrusted_endpoint(self):
        snap = build_topology(states_at([(0, 0, 130), (100, 0, 130)]), {0: 1.0, 1: 0.5}, self.cfg, const_rate)
        assert snap.edges() == []

    def test_square_ring(self):
        # unit square of side 200: diagonals are 283 m, still in range, but q=2 keeps the sides
        st = states_at([(0, 0, 130), (200, 0, 130), (200, 200, 130), (0, 200, 130)])
        snap = build_topology(st, None, self.cfg, const_rate)
        assert snap.edges() == [(0, 1), (0, 3), (1, 2), (2, 3)]
        assert all(snap.degree(i) == 2 for i in range(4))
