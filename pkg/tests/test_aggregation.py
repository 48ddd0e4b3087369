"""Delayed aggregation: centralized recursion, distributed rounds, wire format."""

import numpy as np
import pytest

from conftest import make_state, random_state
from swarmnn.aggregation import (AggregationState, DistributedPipeline, ProtocolError,
                                 decode_message, distributed_round, encode_message,
                                 extract_all, extract_z, init_aggregation,
                                 update_aggregation)
from swarmnn.core import (build_comm_graph, build_shift_operator, khop_neighborhood,
                          ShiftOperator)


def random_graph_and_features(rng, n, p, radius=1.6):
    state = random_state(rng, n, spread=2.0)
    graph = build_comm_graph(state, radius)
    shift = build_shift_operator(graph, "mean_neighbor")
    feats = rng.normal(size=(n, p))
    return graph, shift, feats


def delayed_product(shift_dense, feats, t, k):
    """Oracle: S_t ... S_{t-k+1} x_{t-k}, zero before the first observation."""
    if t - k < 0:
        n, p = feats[0].shape
        return np.zeros((n, p))
    out = feats[t - k]
    for m in reversed(range(k)):
        out = shift_dense[t - m] @ out
    return out


class TestCentralized:
    def test_init_all_zero(self):
        agg = init_aggregation(10, 6, 3)
        assert agg.history_depth == 3
        for buf in agg.buffers:
            assert np.array_equal(buf, np.zeros((10, 6)))
        assert np.array_equal(extract_z(agg, 4), np.zeros((3, 6)))

    def test_first_update_fills_only_row_zero(self):
        rng = np.random.default_rng(0)
        _, shift, feats = random_graph_and_features(rng, 5, 4)
        agg = update_aggregation(init_aggregation(5, 4, 3), shift, feats)
        z = extract_z(agg, 2)
        assert np.array_equal(z[0], feats[2])
        assert np.array_equal(z[1:], np.zeros((2, 4)))

    def test_row_zero_is_latest_features(self):
        rng = np.random.default_rng(1)
        agg = init_aggregation(5, 4, 3)
        for _ in range(4):
            _, shift, feats = random_graph_and_features(rng, 5, 4)
            agg = update_aggregation(agg, shift, feats)
        assert np.array_equal(agg.buffers[0], feats)

    def test_consensus_fixed_point(self):
        # static complete pair with mean weights: constant features stay constant
        state = make_state([[0.0, 0.0], [0.5, 0.0]])
        shift = build_shift_operator(build_comm_graph(state, 1.0), "mean_neighbor")
        c = np.array([[2.0, -1.0], [2.0, -1.0]])
        agg = init_aggregation(2, 2, 3)
        for _ in range(5):
            agg = update_aggregation(agg, shift, c)
        for buf in agg.buffers:
            assert np.allclose(buf, c, atol=0, rtol=0)

    def test_zero_shift_only_row_zero(self):
        rng = np.random.default_rng(2)
        zero_shift = ShiftOperator(4, np.zeros(5, dtype=np.int64),
                                   np.zeros(0, dtype=np.int64), np.zeros(0))
        agg = init_aggregation(4, 3, 3)
        for _ in range(4):
            feats = rng.normal(size=(4, 3))
            agg = update_aggregation(agg, zero_shift, feats)
        assert np.array_equal(agg.buffers[0], feats)
        assert np.array_equal(agg.buffers[1], np.zeros((4, 3)))
        assert np.array_equal(agg.buffers[2], np.zeros((4, 3)))

    def test_matches_delayed_product_oracle(self, each_backend):
        # the module's core correctness oracle, over random time-varying graphs
        rng = np.random.default_rng(3)
        for trial in range(25):
            n = int(rng.integers(2, 9))
            k = int(rng.integers(1, 5))
            agg = init_aggregation(n, 3, k)
            dense, feats = [], []
            for t in range(10):
                _, shift, x = random_graph_and_features(rng, n, 3)
                dense.append(shift.to_dense())
                feats.append(x)
                agg = update_aggregation(agg, shift, x)
                for kk in range(k):
                    expected = delayed_product(dense, feats, t, kk)
                    assert np.max(np.abs(agg.buffers[kk] - expected)) <= 1e-12

    def test_extract_z_bounds(self):
        agg = init_aggregation(4, 3, 2)
        with pytest.raises(ValueError):
            extract_z(agg, 4)

    def test_permutation_equivariance(self, each_backend):
        rng = np.random.default_rng(4)
        n, p, k, steps = 7, 3, 3, 5
        perm = rng.permutation(n)
        states = [random_state(rng, n, spread=2.0) for _ in range(steps)]
        feats = [rng.normal(size=(n, p)) for _ in range(steps)]
        agg = init_aggregation(n, p, k)
        agg_p = init_aggregation(n, p, k)
        for state, x in zip(states, feats):
            shift = build_shift_operator(build_comm_graph(state, 1.6), "mean_neighbor")
            permuted = make_state(state.positions[perm], state.velocities[perm])
            shift_p = build_shift_operator(build_comm_graph(permuted, 1.6), "mean_neighbor")
            agg = update_aggregation(agg, shift, x)
            agg_p = update_aggregation(agg_p, shift_p, x[perm])
        for k_idx in range(k):
            assert np.max(np.abs(agg_p.buffers[k_idx] - agg.buffers[k_idx][perm])) <= 1e-12

    def test_locality_contract(self, each_backend):
        # zeroing features of agents outside the realized k-hop information set
        # leaves rows 0..k of an agent's sequence untouched
        rng = np.random.default_rng(5)
        n, p, depth, steps = 7, 3, 4, 6
        states = [random_state(rng, n, spread=2.0) for _ in range(steps)]
        feats = [rng.normal(size=(n, p)) for _ in range(steps)]
        graphs = [build_comm_graph(s, 1.8) for s in states]
        shifts = [build_shift_operator(g, "mean_neighbor") for g in graphs]

        def run(feature_list):
            agg = init_aggregation(n, p, depth)
            for shift, x in zip(shifts, feature_list):
                agg = update_aggregation(agg, shift, x)
            return agg

        baseline = run(feats)
        newest_first = graphs[::-1]
        for agent in range(n):
            for k in range(depth):
                info_set = set()
                for m in range(k + 1):
                    info_set |= khop_neighborhood(newest_first, agent, m)
                masked = []
                for x in feats:
                    x = x.copy()
                    outside = [j for j in range(n) if j not in info_set]
                    x[outside] = 0.0
                    masked.append(x)
                redone = run(masked)
                for m in range(k + 1):
                    assert np.array_equal(redone.buffers[m][agent],
                                          baseline.buffers[m][agent])


class TestMessages:
    def test_roundtrip(self):
        z = np.arange(12.0).reshape(3, 4)
        sender, decoded = decode_message(encode_message(7, z))
        assert sender == 7
        assert np.array_equal(decoded, z)

    def test_wire_layout(self):
        blob = encode_message(1, np.array([[1.5, -2.0]]))
        assert blob[:4] == b"\x01\x00\x00\x00"  # sender id u32 LE
        assert len(blob) == 12 + 16

    def test_truncated_rejected(self):
        blob = encode_message(0, np.ones((2, 2)))
        with pytest.raises(ProtocolError):
            decode_message(blob[:-3])


class TestDistributed:
    def test_single_agent_no_neighbors(self):
        zero_shift = ShiftOperator(1, np.zeros(2, dtype=np.int64),
                                   np.zeros(0, dtype=np.int64), np.zeros(0))
        obs = np.array([[1.0, 2.0, 3.0]])
        sequences, outbox = distributed_round([[]], zero_shift, obs, 3)
        assert np.array_equal(sequences[0, 0], obs[0])
        assert np.array_equal(sequences[0, 1:], np.zeros((2, 3)))
        assert len(outbox) == 1

    def test_static_pair_matches_centralized(self, each_backend):
        rng = np.random.default_rng(6)
        state = make_state([[0.0, 0.0], [0.5, 0.0]])
        shift = build_shift_operator(build_comm_graph(state, 1.0), "mean_neighbor")
        agg = init_aggregation(2, 3, 3)
        pipe = DistributedPipeline(2, 3, 3)
        for _ in range(3):
            obs = rng.normal(size=(2, 3))
            agg = update_aggregation(agg, shift, obs)
            sequences = pipe.round(shift, obs)
            assert np.max(np.abs(sequences - extract_all(agg))) <= 1e-12

    def test_time_varying_graphs_match_centralized(self, each_backend):
        rng = np.random.default_rng(7)
        n, p, depth = 3, 2, 3
        agg = init_aggregation(n, p, depth)
        pipe = DistributedPipeline(n, p, depth)
        for _ in range(5):
            _, shift, obs = random_graph_and_features(rng, n, p, radius=2.5)
            agg = update_aggregation(agg, shift, obs)
            sequences = pipe.round(shift, obs)
            assert np.max(np.abs(sequences - extract_all(agg))) <= 1e-12

    def test_missing_neighbor_message_is_protocol_error(self):
        state = make_state([[0.0, 0.0], [0.5, 0.0]])
        shift = build_shift_operator(build_comm_graph(state, 1.0), "mean_neighbor")
        prev = encode_message(0, np.zeros((2, 2)))
        with pytest.raises(ProtocolError, match="missing message"):
            distributed_round([[prev], []], shift, np.zeros((2, 2)), 2)

    def test_duplicate_message_is_protocol_error(self):
        state = make_state([[0.0, 0.0], [0.5, 0.0]])
        shift = build_shift_operator(build_comm_graph(state, 1.0), "mean_neighbor")
        msg = encode_message(1, np.zeros((2, 2)))
        with pytest.raises(ProtocolError, match="duplicate"):
            distributed_round([[msg, msg], [encode_message(0, np.zeros((2, 2)))]],
                              shift, np.zeros((2, 2)), 2)


def test_buffers_are_readonly():
    agg = init_aggregation(3, 2, 2)
    with pytest.raises(ValueError):
        agg.buffers[0][0, 0] = 1.0
