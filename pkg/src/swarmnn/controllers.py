"""Collision-avoidance potential, flocking controllers, and node features.

The pairwise potential is U(d) = 1/d^2 + log d^2 for d < rho and the constant
1/rho^2 + log rho^2 beyond the cutoff: it diverges at contact, is minimized
at unit separation, and is indifferent past rho. Its gradient decomposes into
the r/d^4 and r/d^2 sums that make up the 6-dim node features, which is what
lets a linear aggregation carry everything the nonlinear controllers need.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend
from .core import CommGraph, FlockState, complete_graph

DEFAULT_EPSILON_DIST = 1e-3
FEATURE_DIM = 6


@dataclass(frozen=True)
class PotentialParams:
    """Cutoff radius rho (>= 1) and the lower distance clamp for singularity safety."""

    rho: float = 1.0
    epsilon_dist: float = DEFAULT_EPSILON_DIST

    def __post_init__(self):
        if self.rho < 1:
            raise ValueError(f"rho must be >= 1, got {self.rho}")
        if not 0 < self.epsilon_dist < 1:
            raise ValueError(
                f"epsilon_dist must be in (0, 1), got {self.epsilon_dist}"
            )


def potential(r_ij, params: PotentialParams) -> float:
    """Pairwise collision-avoidance energy as a function of the offset r_j - r_i."""
    d = max(float(np.linalg.norm(r_ij)), params.epsilon_dist)
    d = min(d, params.rho)
    return 1.0 / (d * d) + np.log(d * d)


def potential_gradient(r_i, r_j, params: PotentialParams) -> np.ndarray:
    """Gradient of the potential with respect to r_i; zero beyond the cutoff.

    For d < rho this is r_ij * (2/d^4 - 2/d^2) with r_ij = r_j - r_i (the same
    factored form the kernels accumulate), with d clamped below at epsilon_dist.
    """
    r_ij = np.asarray(r_j, dtype=np.float64) - np.asarray(r_i, dtype=np.float64)
    d = max(float(np.linalg.norm(r_ij)), params.epsilon_dist)
    if d >= params.rho:
        return np.zeros(2)
    inv2 = 1.0 / (d * d)
    inv4 = inv2 * inv2
    return r_ij * (2.0 * inv4 - 2.0 * inv2)


def global_controller(state: FlockState, params: PotentialParams) -> np.ndarray:
    """Clairvoyant expert: velocity agreement plus potential descent over all agents.

    u_i = -sum_{j != i} (v_i - v_j) - sum_{j != i} grad_{r_i} U(r_i, r_j).
    """
    graph = complete_graph(state.n_agents)
    return _backend.impl.controller_sums(
        state.positions, state.velocities, graph.indptr, graph.indices,
        float(params.rho), float(params.epsilon_dist),
    )


def local_controller(state: FlockState, graph: CommGraph,
                     params: PotentialParams) -> np.ndarray:
    """Same control law with both sums restricted to radius-R neighbors.

    Isolated agents get zero actions. With a complete graph this reproduces
    global_controller bitwise (identical kernel, identical edge order).
    """
    if graph.n_agents != state.n_agents:
        raise ValueError(
            f"graph has {graph.n_agents} agents, state has {state.n_agents}"
        )
    return _backend.impl.controller_sums(
        state.positions, state.velocities, graph.indptr, graph.indices,
        float(params.rho), float(params.epsilon_dist),
    )


def compute_features(state: FlockState, graph: CommGraph,
                     epsilon_dist: float = DEFAULT_EPSILON_DIST,
                     clip: float = 0.0) -> np.ndarray:
    """Per-agent 6-dim features: neighbor sums of (v_i - v_j), r_ij/d^4, r_ij/d^2.

    Agents with empty neighborhoods get zero rows. Distances are clamped below
    at epsilon_dist like the potential. clip > 0 truncates every component to
    [-clip, clip]; the default leaves magnitudes untouched.
    """
    if graph.n_agents != state.n_agents:
        raise ValueError(
            f"graph has {graph.n_agents} agents, state has {state.n_agents}"
        )
    feats = _backend.impl.flock_features(
        state.positions, state.velocities, graph.indptr, graph.indices,
        float(epsilon_dist),
    )
    if clip > 0:
        feats = np.clip(feats, -clip, clip)
    return feats
