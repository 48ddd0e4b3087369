"""State containers, disc graphs, shift operators, and k-hop neighborhoods."""

import numpy as np
import pytest

from conftest import make_state, random_state
from swarmnn.core import (apply_shift, build_comm_graph, build_shift_operator,
                          complete_graph, khop_neighborhood, CommGraph, FlockState,
                          ShiftOperator, BINARY_ADJACENCY, MEAN_NEIGHBOR)


def path_graph_state():
    # pairwise distances: 0-1: 0.6, 1-2: 0.6, 0-2: 1.2
    return make_state([[0.0, 0.0], [0.6, 0.0], [1.2, 0.0]])


class TestFlockState:
    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            make_state([[0.0, 0.0], [np.nan, 1.0]])
        with pytest.raises(ValueError):
            make_state([[0.0, 0.0], [1.0, 1.0]], velocities=[[np.inf, 0], [0, 0]])

    def test_rejects_too_few_agents(self):
        with pytest.raises(ValueError):
            make_state([[0.0, 0.0]])

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            FlockState(np.zeros((3, 2)), np.zeros((2, 2)), np.zeros(3, dtype=bool))

    def test_arrays_immutable(self):
        state = path_graph_state()
        with pytest.raises(ValueError):
            state.positions[0, 0] = 5.0


class TestBuildCommGraph:
    def test_two_agents_within_radius(self, each_backend):
        g = build_comm_graph(make_state([[0.0, 0.0], [0.5, 0.0]]), 1.0)
        assert g.edge_set() == {(0, 1), (1, 0)}

    def test_boundary_distance_excluded(self, each_backend):
        g = build_comm_graph(make_state([[0.0, 0.0], [1.0, 0.0]]), 1.0)
        assert g.edge_set() == set()

    def test_path_graph(self, each_backend):
        g = build_comm_graph(path_graph_state(), 1.0)
        assert g.edge_set() == {(0, 1), (1, 0), (1, 2), (2, 1)}
        assert g.degrees.tolist() == [1, 2, 1]
        g.check_invariants()

    def test_coincident_agents_not_connected(self, each_backend):
        g = build_comm_graph(make_state([[0.0, 0.0], [0.0, 0.0]]), 1.0)
        assert g.edge_set() == set()

    def test_rejects_bad_radius(self):
        with pytest.raises(ValueError):
            build_comm_graph(path_graph_state(), 0.0)

    def test_symmetry_and_degrees_random(self, each_backend):
        rng = np.random.default_rng(3)
        for _ in range(20):
            g = build_comm_graph(random_state(rng, 12), 2.0)
            g.check_invariants()

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(4)
        state = random_state(rng, 9)
        perm = rng.permutation(9)
        permuted = make_state(state.positions[perm], state.velocities[perm])
        g = build_comm_graph(state, 2.5)
        gp = build_comm_graph(permuted, 2.5)
        inverse = np.argsort(perm)
        expected = {(inverse[i], inverse[j]) for i, j in g.edge_set()}
        assert gp.edge_set() == expected


class TestShiftOperator:
    def test_binary_path(self):
        g = build_comm_graph(path_graph_state(), 1.0)
        s = build_shift_operator(g, BINARY_ADJACENCY)
        dense = s.to_dense()
        expected = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=float)
        assert np.array_equal(dense, expected)

    def test_mean_path(self):
        g = build_comm_graph(path_graph_state(), 1.0)
        s = build_shift_operator(g, MEAN_NEIGHBOR)
        dense = s.to_dense()
        expected = np.array([[0, 1, 0], [0.5, 0, 0.5], [0, 1, 0]])
        assert np.allclose(dense, expected, atol=0, rtol=0)

    def test_empty_graph_all_zero(self):
        g = build_comm_graph(make_state([[0.0, 0.0], [5.0, 0.0]]), 1.0)
        for scheme in (BINARY_ADJACENCY, MEAN_NEIGHBOR):
            s = build_shift_operator(g, scheme)
            assert np.array_equal(s.to_dense(), np.zeros((2, 2)))

    def test_mean_rows_stochastic(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            g = build_comm_graph(random_state(rng, 10), 2.0)
            dense = build_shift_operator(g, MEAN_NEIGHBOR).to_dense()
            sums = dense.sum(axis=1)
            connected = g.degrees > 0
            assert np.all(np.abs(sums[connected] - 1.0) <= 1e-12)
            assert np.all(sums[~connected] == 0.0)
            assert np.all(np.diag(dense) == 0.0)

    def test_unknown_scheme(self):
        g = build_comm_graph(path_graph_state(), 1.0)
        with pytest.raises(ValueError):
            build_shift_operator(g, "laplacian")


class TestApplyShift:
    def test_zero_operator(self, each_backend):
        g = build_comm_graph(make_state([[0.0, 0.0], [5.0, 0.0]]), 1.0)
        s = build_shift_operator(g)
        x = np.array([[1.0, 2.0], [3.0, 4.0]])
        assert np.array_equal(apply_shift(s, x), np.zeros((2, 2)))

    def test_path_mean_hand_case(self, each_backend):
        g = build_comm_graph(path_graph_state(), 1.0)
        s = build_shift_operator(g, MEAN_NEIGHBOR)
        out = apply_shift(s, np.array([[1.0], [2.0], [3.0]]))
        assert np.allclose(out, [[2.0], [2.0], [2.0]], atol=0, rtol=0)

    def test_identity_structured(self, each_backend):
        s = ShiftOperator(3, np.arange(4, dtype=np.int64),
                          np.arange(3, dtype=np.int64), np.ones(3))
        x = np.random.default_rng(0).normal(size=(3, 4))
        assert np.array_equal(apply_shift(s, x), x)

    def test_dimension_mismatch(self):
        g = build_comm_graph(path_graph_state(), 1.0)
        s = build_shift_operator(g)
        with pytest.raises(ValueError):
            apply_shift(s, np.zeros((4, 2)))

    def test_touches_only_stored_entries(self, each_backend):
        # rows never referenced by any stored entry may hold junk without effect
        g = build_comm_graph(path_graph_state(), 1.0)
        s = build_shift_operator(g, MEAN_NEIGHBOR)
        x = np.array([[1.0], [2.0], [3.0]])
        extended = ShiftOperator(4, np.append(s.indptr, s.indptr[-1]),
                                 s.indices, s.data)
        x_bad = np.vstack([x, [[np.nan]]])
        out = apply_shift(extended, x_bad)
        assert np.allclose(out[:3], [[2.0], [2.0], [2.0]], atol=0, rtol=0)
        assert out[3, 0] == 0.0

    def test_isolated_rows_zero(self, each_backend):
        state = make_state([[0.0, 0.0], [0.5, 0.0], [9.0, 9.0]])
        g = build_comm_graph(state, 1.0)
        s = build_shift_operator(g, MEAN_NEIGHBOR)
        out = apply_shift(s, np.ones((3, 2)))
        assert np.array_equal(out[2], np.zeros(2))

    def test_mean_rows_convex_combination(self, each_backend):
        rng = np.random.default_rng(6)
        state = random_state(rng, 10)
        g = build_comm_graph(state, 2.5)
        s = build_shift_operator(g, MEAN_NEIGHBOR)
        x = rng.normal(size=(10, 3))
        out = apply_shift(s, x)
        for i in range(10):
            nbrs = g.neighbors(i)
            if nbrs.size == 0:
                continue
            lo, hi = x[nbrs].min(axis=0), x[nbrs].max(axis=0)
            assert np.all(out[i] >= lo - 1e-12) and np.all(out[i] <= hi + 1e-12)

    def test_permutation_equivariance(self, each_backend):
        rng = np.random.default_rng(7)
        state = random_state(rng, 8)
        x = rng.normal(size=(8, 5))
        perm = rng.permutation(8)
        g = build_comm_graph(state, 2.5)
        s = build_shift_operator(g, MEAN_NEIGHBOR)
        permuted = make_state(state.positions[perm], state.velocities[perm])
        gp = build_comm_graph(permuted, 2.5)
        sp = build_shift_operator(gp, MEAN_NEIGHBOR)
        out = apply_shift(s, x)
        out_p = apply_shift(sp, x[perm])
        assert np.max(np.abs(out_p - out[perm])) <= 1e-12


class TestKhopNeighborhood:
    def test_zero_hops_is_self(self):
        g = build_comm_graph(path_graph_state(), 1.0)
        assert khop_neighborhood([], 1, 0) == {1}

    def test_static_path_two_hops(self):
        g = build_comm_graph(path_graph_state(), 1.0)
        assert khop_neighborhood([g, g], 0, 2) == {0, 2}

    def test_time_varying_pair(self):
        # current graph has edge 0-1 only, previous has edge 1-2 only: the only
        # length-2 walk from 0 is 0->1 (now) then 1->2 (previous), so exactly {2}
        g_now = build_comm_graph(make_state([[0, 0], [0.5, 0], [5, 0]]), 1.0)
        g_prev = build_comm_graph(make_state([[0, 0], [5, 0], [5.5, 0]]), 1.0)
        assert khop_neighborhood([g_now, g_prev], 0, 2) == {2}

    def test_insufficient_history(self):
        g = build_comm_graph(path_graph_state(), 1.0)
        with pytest.raises(ValueError):
            khop_neighborhood([g], 0, 2)

    def test_matches_adjacency_power_oracle(self):
        rng = np.random.default_rng(8)
        for trial in range(20):
            state = random_state(rng, 8)
            g = build_comm_graph(state, 2.0)
            adj = np.zeros((8, 8))
            for i, j in g.edge_set():
                adj[i, j] = 1.0
            power = np.eye(8)
            for k in range(4):
                if k > 0:
                    power = adj @ power
                for i in range(8):
                    expected = set(np.nonzero(power[i])[0].tolist())
                    assert khop_neighborhood([g] * k, i, k) == expected


def test_complete_graph_structure():
    g = complete_graph(5)
    assert g.n_edges == 20
    g.check_invariants()
    assert set(g.neighbors(2).tolist()) == {0, 1, 3, 4}
