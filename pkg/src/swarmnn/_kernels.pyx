# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled per-step simulation kernels.

Semantics match swarmnn._kernels_py exactly (same expressions, same CSR
edge-order accumulation); see that module for the documented contracts.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, sqrt

cnp.import_array()

NAME = "compiled"


def radius_edges(const double[:, ::1] positions, double radius):
    cdef Py_ssize_t n = positions.shape[0]
    cdef double r2 = radius * radius
    cdef cnp.ndarray[cnp.int64_t, ndim=1] indptr = np.zeros(n + 1, dtype=np.int64)
    cdef cnp.int64_t[::1] iptr = indptr
    cdef Py_ssize_t i, j
    cdef double dx, dy, d2
    cdef Py_ssize_t count = 0

    for i in range(n):
        for j in range(n):
            dx = positions[j, 0] - positions[i, 0]
            dy = positions[j, 1] - positions[i, 1]
            d2 = dx * dx + dy * dy
            if d2 > 0.0 and d2 < r2:
                count += 1
        iptr[i + 1] = count

    cdef cnp.ndarray[cnp.int64_t, ndim=1] indices = np.empty(count, dtype=np.int64)
    cdef cnp.int64_t[::1] idx = indices
    cdef Py_ssize_t k = 0
    for i in range(n):
        for j in range(n):
            dx = positions[j, 0] - positions[i, 0]
            dy = positions[j, 1] - positions[i, 1]
            d2 = dx * dx + dy * dy
            if d2 > 0.0 and d2 < r2:
                idx[k] = j
                k += 1
    return indptr, indices


def flock_features(const double[:, ::1] positions, const double[:, ::1] velocities,
                   const cnp.int64_t[::1] indptr, const cnp.int64_t[::1] indices, double eps):
    cdef Py_ssize_t n = positions.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.zeros((n, 6))
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, e, j
    cdef double dx, dy, d, inv2, inv4

    for i in range(n):
        for e in range(indptr[i], indptr[i + 1]):
            j = indices[e]
            dx = positions[j, 0] - positions[i, 0]
            dy = positions[j, 1] - positions[i, 1]
            d = sqrt(dx * dx + dy * dy)
            if d < eps:
                d = eps
            inv2 = 1.0 / (d * d)
            inv4 = inv2 * inv2
            o[i, 0] += velocities[i, 0] - velocities[j, 0]
            o[i, 1] += velocities[i, 1] - velocities[j, 1]
            o[i, 2] += dx * inv4
            o[i, 3] += dy * inv4
            o[i, 4] += dx * inv2
            o[i, 5] += dy * inv2
    return out


def controller_sums(const double[:, ::1] positions, const double[:, ::1] velocities,
                    const cnp.int64_t[::1] indptr, const cnp.int64_t[::1] indices,
                    double rho, double eps):
    cdef Py_ssize_t n = positions.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.zeros((n, 2))
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, e, j
    cdef double dx, dy, d, inv2, inv4, coef

    for i in range(n):
        for e in range(indptr[i], indptr[i + 1]):
            j = indices[e]
            dx = positions[j, 0] - positions[i, 0]
            dy = positions[j, 1] - positions[i, 1]
            d = sqrt(dx * dx + dy * dy)
            if d < eps:
                d = eps
            if d < rho:
                inv2 = 1.0 / (d * d)
                inv4 = inv2 * inv2
                coef = 2.0 * inv4 - 2.0 * inv2
            else:
                coef = 0.0
            o[i, 0] += -(velocities[i, 0] - velocities[j, 0]) - dx * coef
            o[i, 1] += -(velocities[i, 1] - velocities[j, 1]) - dy * coef
    return out


def csr_apply(const cnp.int64_t[::1] indptr, const cnp.int64_t[::1] indices,
              const double[::1] data, const double[:, ::1] X):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t p = X.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.zeros((n, p))
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, e, j, c
    cdef double w

    for i in range(n):
        for e in range(indptr[i], indptr[i + 1]):
            j = indices[e]
            w = data[e]
            for c in range(p):
                o[i, c] += w * X[j, c]
    return out


def min_neighbor_dists(const double[:, ::1] positions):
    cdef Py_ssize_t n = positions.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n)
    cdef double[::1] o = out
    cdef Py_ssize_t i, j
    cdef double dx, dy, d2, best

    for i in range(n):
        best = INFINITY
        for j in range(n):
            if j == i:
                continue
            dx = positions[j, 0] - positions[i, 0]
            dy = positions[j, 1] - positions[i, 1]
            d2 = dx * dx + dy * dy
            if d2 < best:
                best = d2
        o[i] = sqrt(best)
    return out
