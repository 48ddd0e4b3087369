"""Delayed aggregation of node features over time-varying shift operators.

The centralized recursion keeps K buffers y_0..y_{K-1}; each update shifts the
OLD buffer k-1 into the new buffer k (one communication round of delay per
hop) and loads the fresh features into buffer 0, so buffer k holds the k-step
diffusion S_n S_{n-1} ... S_{n-k+1} x_{n-k}. Buffers start at zero.

The distributed mode reproduces the same numbers one agent at a time: each
agent combines only the sequences its current neighbors transmitted last
round, weighted by its own shift-operator row, then prepends its own fresh
observation. Messages are fixed-size regardless of team size.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .core import ShiftOperator, apply_shift, readonly


class ProtocolError(RuntimeError):
    """A required neighbor message is missing or duplicated."""


@dataclass(frozen=True)
class AggregationState:
    """K stacked (N, p) diffusion buffers; buffers[0] is the current features."""

    buffers: tuple

    def __post_init__(self):
        buffers = tuple(readonly(b) for b in self.buffers)
        if not buffers:
            raise ValueError("need at least one buffer (K >= 1)")
        shape = buffers[0].shape
        if any(b.shape != shape for b in buffers):
            raise ValueError("all buffers must share one (N, p) shape")
        object.__setattr__(self, "buffers", buffers)

    @property
    def history_depth(self):
        return len(self.buffers)

    @property
    def n_agents(self):
        return self.buffers[0].shape[0]

    @property
    def feature_dim(self):
        return self.buffers[0].shape[1]


def init_aggregation(n_agents: int, feature_dim: int, history_depth: int) -> AggregationState:
    """All-zero buffers: nothing has been observed or exchanged yet."""
    if history_depth < 1 or feature_dim < 1 or n_agents < 1:
        raise ValueError(
            f"need n_agents, feature_dim, history_depth >= 1, got "
            f"({n_agents}, {feature_dim}, {history_depth})"
        )
    return AggregationState(
        tuple(np.zeros((n_agents, feature_dim)) for _ in range(history_depth))
    )


def update_aggregation(agg: AggregationState, shift: ShiftOperator,
                       features: np.ndarray) -> AggregationState:
    """One synchronous round: shift every old buffer down one slot, observe fresh.

    new[k] = S @ old[k-1] for k = K-1..1 (old buffers only — the one-step
    delay), new[0] = features.
    """
    features = np.asarray(features, dtype=np.float64)
    if features.shape != (agg.n_agents, agg.feature_dim):
        raise ValueError(
            f"features must be {(agg.n_agents, agg.feature_dim)}, got {features.shape}"
        )
    if shift.n_agents != agg.n_agents:
        raise ValueError(
            f"shift has {shift.n_agents} agents, aggregation has {agg.n_agents}"
        )
    shifted = [apply_shift(shift, agg.buffers[k - 1]) for k in range(1, agg.history_depth)]
    return AggregationState((features.copy(), *shifted))


def extract_z(agg: AggregationState, agent: int) -> np.ndarray:
    """Agent's (K, p) aggregation sequence; row k is its slice of buffer k."""
    if not 0 <= agent < agg.n_agents:
        raise ValueError(f"agent must be in [0, {agg.n_agents}), got {agent}")
    return np.stack([b[agent] for b in agg.buffers])


def extract_all(agg: AggregationState) -> np.ndarray:
    """(N, K, p) stack of every agent's aggregation sequence."""
    return np.stack(agg.buffers, axis=1)


# Wire format for one aggregation-sequence message:
#   sender id (u32 LE), K (u32 LE), p (u32 LE), K*p float64 LE row-major.
_HEADER = struct.Struct("<III")


def encode_message(sender: int, sequence: np.ndarray) -> bytes:
    k, p = sequence.shape
    payload = np.ascontiguousarray(sequence, dtype="<f8").tobytes()
    return _HEADER.pack(sender, k, p) + payload


def decode_message(blob: bytes):
    if len(blob) < _HEADER.size:
        raise ProtocolError(f"message truncated: {len(blob)} bytes")
    sender, k, p = _HEADER.unpack_from(blob)
    expected = _HEADER.size + 8 * k * p
    if len(blob) != expected:
        raise ProtocolError(
            f"message length {len(blob)} != expected {expected} for K={k}, p={p}"
        )
    sequence = np.frombuffer(blob, dtype="<f8", offset=_HEADER.size).reshape(k, p)
    return sender, sequence.astype(np.float64)


def distributed_round(mailboxes, shift: ShiftOperator, observations: np.ndarray,
                      history_depth: int):
    """Per-agent inference round: combine neighbor sequences, observe, retransmit.

    mailboxes[i] is the list of encoded messages agent i received this step —
    exactly one from each current neighbor (each j with a stored entry in row i
    of the shift operator), carrying that neighbor's previous-step sequence.
    Agent i computes row k of its new sequence as sum_j S[i,j] * z_j_prev[k-1]
    for k >= 1 and sets row 0 to its own observation, using nothing but its
    mailbox, its own shift row, and its own observation. history_depth is part
    of every agent's fixed configuration.

    Returns (sequences, outbox): the (N, K, p) sequences and the encoded
    message each agent broadcasts to its next-step neighbors.

    Raises ProtocolError if any required neighbor message is missing or
    duplicated; messages from non-neighbors are ignored.
    """
    observations = np.asarray(observations, dtype=np.float64)
    n = shift.n_agents
    if observations.shape[0] != n:
        raise ValueError(f"observations must have {n} rows, got {observations.shape}")
    p = observations.shape[1]
    depth = history_depth
    sequences = np.zeros((n, depth, p))
    outbox = []
    for i in range(n):
        received = {}
        for blob in mailboxes[i]:
            sender, seq = decode_message(blob)
            if sender in received:
                raise ProtocolError(f"agent {i}: duplicate message from {sender}")
            received[sender] = seq
        z_new = np.zeros((depth, p))
        z_new[0] = observations[i]
        neighbor_ids, weights = shift.row(i)
        for j, w in zip(neighbor_ids.tolist(), weights.tolist()):
            if j not in received:
                raise ProtocolError(
                    f"agent {i}: missing message from current neighbor {j}"
                )
            z_prev = received[j]
            if z_prev.shape != (depth, p):
                raise ProtocolError(
                    f"agent {i}: neighbor {j} sequence shape {z_prev.shape} "
                    f"!= {(depth, p)}"
                )
            for k in range(1, depth):
                z_new[k] += w * z_prev[k - 1]
        sequences[i] = z_new
        outbox.append(encode_message(i, z_new))
    return sequences, outbox


class DistributedPipeline:
    """Synchronous-round harness over distributed_round for whole trajectories.

    Keeps each agent's last transmitted message and delivers it to the agents
    that currently list the sender as a neighbor. Before the first round every
    agent is treated as having transmitted an all-zero sequence, matching the
    centralized cold start.
    """

    def __init__(self, n_agents: int, feature_dim: int, history_depth: int):
        self.n_agents = n_agents
        self.history_depth = history_depth
        self.feature_dim = feature_dim
        zero = np.zeros((history_depth, feature_dim))
        self._last_outbox = [encode_message(i, zero) for i in range(n_agents)]

    def round(self, shift: ShiftOperator, observations: np.ndarray) -> np.ndarray:
        mailboxes = [
            [self._last_outbox[j] for j in shift.row(i)[0].tolist()]
            for i in range(self.n_agents)
        ]
        sequences, outbox = distributed_round(
            mailboxes, shift, observations, self.history_depth
        )
        self._last_outbox = outbox
        return sequences
