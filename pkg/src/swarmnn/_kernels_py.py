"""Pure-numpy implementations of the per-step simulation kernels.

These mirror the optional Cython extension ``swarmnn._kernels`` operation by
operation; ``swarmnn._backend`` picks whichever is available at import time.
Expressions and accumulation order (CSR edge order, x before y) are kept
identical on both sides so the backends agree to within a few ulps.
"""

import numpy as np

NAME = "python"


def radius_edges(positions, radius):
    """CSR adjacency (indptr, indices) of the disc graph.

    Edge (i, j) present iff 0 < ||r_j - r_i|| < radius (strict on both
    sides, so coincident agents and agents exactly at the radius are not
    connected). Column indices are sorted within each row.
    """
    diff = positions[:, None, :] - positions[None, :, :]
    d2 = diff[..., 0] ** 2 + diff[..., 1] ** 2
    mask = (d2 > 0.0) & (d2 < radius * radius)
    rows, cols = np.nonzero(mask)
    indptr = np.zeros(positions.shape[0] + 1, dtype=np.int64)
    np.cumsum(np.count_nonzero(mask, axis=1), out=indptr[1:])
    return indptr, cols.astype(np.int64)


def _edge_rows(indptr):
    return np.repeat(np.arange(indptr.shape[0] - 1), np.diff(indptr))


def flock_features(positions, velocities, indptr, indices, eps):
    """Per-agent 6-dim feature rows: neighbor sums of (v_i - v_j), r_ij/d^4, r_ij/d^2.

    Distances are clamped below at eps; agents with no neighbors get zero rows.
    """
    n = positions.shape[0]
    out = np.zeros((n, 6))
    if indices.size == 0:
        return out
    rows = _edge_rows(indptr)
    rij = positions[indices] - positions[rows]
    d = np.sqrt(rij[:, 0] ** 2 + rij[:, 1] ** 2)
    d = np.maximum(d, eps)
    inv2 = 1.0 / (d * d)
    inv4 = inv2 * inv2
    contrib = np.concatenate(
        [
            velocities[rows] - velocities[indices],
            rij * inv4[:, None],
            rij * inv2[:, None],
        ],
        axis=1,
    )
    np.add.at(out, rows, contrib)
    return out


def controller_sums(positions, velocities, indptr, indices, rho, eps):
    """Flocking control actions -sum(v_i - v_j) - sum(grad U) over CSR neighbors.

    The potential gradient term is r_ij * (2/d^4 - 2/d^2) for d < rho and zero
    beyond the cutoff; d is clamped below at eps.
    """
    n = positions.shape[0]
    out = np.zeros((n, 2))
    if indices.size == 0:
        return out
    rows = _edge_rows(indptr)
    rij = positions[indices] - positions[rows]
    d = np.sqrt(rij[:, 0] ** 2 + rij[:, 1] ** 2)
    d = np.maximum(d, eps)
    inv2 = 1.0 / (d * d)
    inv4 = inv2 * inv2
    coef = np.where(d < rho, 2.0 * inv4 - 2.0 * inv2, 0.0)
    contrib = -(velocities[rows] - velocities[indices]) - rij * coef[:, None]
    np.add.at(out, rows, contrib)
    return out


def csr_apply(indptr, indices, data, X):
    """Sparse row-wise product: out[i] = sum_j S[i,j] * X[j] over stored entries."""
    n = indptr.shape[0] - 1
    out = np.zeros((n, X.shape[1]))
    if indices.size == 0:
        return out
    rows = _edge_rows(indptr)
    np.add.at(out, rows, data[:, None] * X[indices])
    return out


def min_neighbor_dists(positions):
    """Per-agent minimum distance to any other agent."""
    diff = positions[:, None, :] - positions[None, :, :]
    d2 = diff[..., 0] ** 2 + diff[..., 1] ** 2
    np.fill_diagonal(d2, np.inf)
    return np.sqrt(d2.min(axis=1))
