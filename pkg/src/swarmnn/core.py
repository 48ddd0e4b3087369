"""Swarm state, disc communication graphs, and graph shift operators.

State and graph containers are immutable values (arrays are made read-only at
construction) so rollouts can share them freely across workers. Graphs and
shift operators use a CSR layout -- (indptr, indices[, data]) with column
indices sorted within each row -- which is what both kernel backends consume.
Feature matrices are plain (N, p) float64 arrays.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _backend

BINARY_ADJACENCY = "binary_adjacency"
MEAN_NEIGHBOR = "mean_neighbor"
SHIFT_SCHEMES = (BINARY_ADJACENCY, MEAN_NEIGHBOR)


def readonly(array, dtype=np.float64):
    """Contiguous read-only copy-on-demand view used by the value types."""
    out = np.ascontiguousarray(array, dtype=dtype)
    if out is array:
        out = out.copy()
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class FlockState:
    """Planar swarm snapshot: positions (m), velocities (m/s), leader flags, time index."""

    positions: np.ndarray
    velocities: np.ndarray
    leader_mask: np.ndarray
    step_index: int = 0

    def __post_init__(self):
        pos = readonly(self.positions)
        vel = readonly(self.velocities)
        mask = readonly(self.leader_mask, dtype=bool)
        if pos.ndim != 2 or pos.shape[1] != 2:
            raise ValueError(f"positions must be (N, 2), got {pos.shape}")
        if vel.shape != pos.shape:
            raise ValueError(f"velocities shape {vel.shape} != positions shape {pos.shape}")
        if mask.shape != (pos.shape[0],):
            raise ValueError(f"leader_mask must be (N,), got {mask.shape}")
        if pos.shape[0] < 2:
            raise ValueError(f"need at least 2 agents, got {pos.shape[0]}")
        if not np.isfinite(pos).all() or not np.isfinite(vel).all():
            raise ValueError("positions and velocities must be finite")
        if self.step_index < 0:
            raise ValueError(f"step_index must be >= 0, got {self.step_index}")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "velocities", vel)
        object.__setattr__(self, "leader_mask", mask)

    @property
    def n_agents(self):
        return self.positions.shape[0]


@dataclass(frozen=True)
class CommGraph:
    """Symmetric disc-graph adjacency in CSR form; (i, j) means j may send to i."""

    n_agents: int
    indptr: np.ndarray
    indices: np.ndarray

    def __post_init__(self):
        indptr = readonly(self.indptr, dtype=np.int64)
        indices = readonly(self.indices, dtype=np.int64)
        if indptr.shape != (self.n_agents + 1,):
            raise ValueError(f"indptr must be (N+1,), got {indptr.shape}")
        if indptr[0] != 0 or indptr[-1] != indices.shape[0]:
            raise ValueError("indptr endpoints inconsistent with indices")
        object.__setattr__(self, "indptr", indptr)
        object.__setattr__(self, "indices", indices)

    @property
    def degrees(self):
        return np.diff(self.indptr)

    @property
    def n_edges(self):
        return int(self.indices.shape[0])

    def neighbors(self, i):
        return self.indices[self.indptr[i] : self.indptr[i + 1]]

    def edge_set(self):
        rows = np.repeat(np.arange(self.n_agents), self.degrees)
        return set(zip(rows.tolist(), self.indices.tolist()))

    def check_invariants(self):
        """Full invariant sweep (symmetry, no self-pairs); meant for tests."""
        edges = self.edge_set()
        assert all(i != j for i, j in edges), "self-pair present"
        assert all((j, i) in edges for i, j in edges), "adjacency not symmetric"
        assert len(edges) == self.n_edges, "duplicate edge"


@dataclass(frozen=True)
class ShiftOperator:
    """Sparse graph shift operator S; entry (i, j) weights what j sends to i."""

    n_agents: int
    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray

    def __post_init__(self):
        indptr = readonly(self.indptr, dtype=np.int64)
        indices = readonly(self.indices, dtype=np.int64)
        data = readonly(self.data)
        if indptr.shape != (self.n_agents + 1,):
            raise ValueError(f"indptr must be (N+1,), got {indptr.shape}")
        if data.shape != indices.shape:
            raise ValueError("data and indices must have equal length")
        object.__setattr__(self, "indptr", indptr)
        object.__setattr__(self, "indices", indices)
        object.__setattr__(self, "data", data)

    def row(self, i):
        sl = slice(self.indptr[i], self.indptr[i + 1])
        return self.indices[sl], self.data[sl]

    def to_dense(self):
        dense = np.zeros((self.n_agents, self.n_agents))
        rows = np.repeat(np.arange(self.n_agents), np.diff(self.indptr))
        dense[rows, self.indices] = self.data
        return dense


def build_comm_graph(state: FlockState, radius: float) -> CommGraph:
    """Disc graph over the state's positions: edge iff 0 < distance < radius."""
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    if not np.isfinite(state.positions).all():
        raise ValueError("positions must be finite")
    indptr, indices = _backend.impl.radius_edges(state.positions, float(radius))
    return CommGraph(state.n_agents, indptr, indices)


@lru_cache(maxsize=32)
def complete_graph(n_agents: int) -> CommGraph:
    """All-pairs graph (every j != i), used to run kernels over the full team."""
    cols = np.arange(n_agents, dtype=np.int64)
    indices = np.concatenate([np.delete(cols, i) for i in range(n_agents)])
    indptr = np.arange(n_agents + 1, dtype=np.int64) * (n_agents - 1)
    return CommGraph(n_agents, indptr, indices)


def build_shift_operator(graph: CommGraph, scheme: str = MEAN_NEIGHBOR) -> ShiftOperator:
    """Realize a graph as a shift operator with zero diagonal.

    binary_adjacency: every edge weighted 1. mean_neighbor: row i weighted
    1/degree(i), so nonempty rows average their neighbors (row-stochastic);
    isolated agents keep all-zero rows.
    """
    if scheme == BINARY_ADJACENCY:
        data = np.ones(graph.n_edges)
    elif scheme == MEAN_NEIGHBOR:
        degrees = graph.degrees
        inv = np.zeros(graph.n_agents)
        np.divide(1.0, degrees, out=inv, where=degrees > 0)
        data = np.repeat(inv, degrees)
    else:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SHIFT_SCHEMES}")
    return ShiftOperator(graph.n_agents, graph.indptr, graph.indices, data)


def apply_shift(shift: ShiftOperator, features: np.ndarray) -> np.ndarray:
    """Row-wise diffusion out[i] = sum_j S[i,j] * features[j] over stored entries."""
    features = np.ascontiguousarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[0] != shift.n_agents:
        raise ValueError(
            f"feature matrix must be ({shift.n_agents}, p), got {features.shape}"
        )
    return _backend.impl.csr_apply(shift.indptr, shift.indices, shift.data, features)


def khop_neighborhood(graph_sequence, agent: int, hops: int) -> set:
    """Exact k-hop neighborhood of an agent over a time-varying graph sequence.

    graph_sequence is ordered newest first: hop 1 walks the current graph,
    hop 2 walks the previous one, and so on. hops=0 is the agent itself.
    """
    if hops < 0:
        raise ValueError(f"hops must be >= 0, got {hops}")
    if len(graph_sequence) < hops:
        raise ValueError(
            f"need at least {hops} graphs of history, got {len(graph_sequence)}"
        )
    frontier = {agent}
    for depth in range(hops):
        graph = graph_sequence[depth]
        reached = set()
        for j in frontier:
            reached.update(graph.neighbors(j).tolist())
        frontier = reached
    return frontier
