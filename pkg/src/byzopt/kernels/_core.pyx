# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot-loop kernels: prox, penalty accumulation, SAGA transaction.

Mirrors ``_fallback.py``; keep both in sync.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, sqrt

IMPL = "compiled"


def soft_threshold(v, double t):
    """Coordinate-wise soft-threshold: sign(v) * max(|v| - t, 0)."""
    arr = np.ascontiguousarray(v, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] flat = arr.ravel()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty_like(flat)
    cdef Py_ssize_t e, n = flat.shape[0]
    cdef double ve, m
    for e in range(n):
        ve = flat[e]
        m = fabs(ve) - t
        if m > 0.0:
            out[e] = m if ve > 0.0 else -m
        else:
            out[e] = 0.0
    return out.reshape(arr.shape)


def penalty_direction_sum(cnp.ndarray[cnp.float64_t, ndim=1] x_i,
                          cnp.ndarray[cnp.float64_t, ndim=2] payloads,
                          int a_norm):
    """Sum of a-norm subgradients of ||x_i - z_j|| over the payload rows."""
    cdef Py_ssize_t deg = payloads.shape[0]
    cdef Py_ssize_t n = x_i.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] acc = np.zeros(n, dtype=np.float64)
    cdef Py_ssize_t j, e
    cdef double d, nrm
    if a_norm == 1:
        for j in range(deg):
            for e in range(n):
                d = x_i[e] - payloads[j, e]
                if d > 0.0:
                    acc[e] += 1.0
                elif d < 0.0:
                    acc[e] -= 1.0
    elif a_norm == 2:
        for j in range(deg):
            nrm = 0.0
            for e in range(n):
                d = x_i[e] - payloads[j, e]
                nrm += d * d
            nrm = sqrt(nrm)
            if nrm > 0.0:
                for e in range(n):
                    acc[e] += (x_i[e] - payloads[j, e]) / nrm
    else:
        raise ValueError(f"a_norm must be 1 or 2, got {a_norm}")
    return acc


def saga_update(cnp.ndarray[cnp.float64_t, ndim=2] table,
                cnp.ndarray[cnp.float64_t, ndim=1] avg,
                cnp.ndarray[cnp.float64_t, ndim=1] g_new,
                Py_ssize_t s):
    """One SAGA table transaction at slot ``s`` (see fallback docstring)."""
    cdef Py_ssize_t q = table.shape[0]
    cdef Py_ssize_t n = table.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] r = np.empty(n, dtype=np.float64)
    cdef Py_ssize_t e
    cdef double diff
    for e in range(n):
        diff = g_new[e] - table[s, e]
        r[e] = diff + avg[e]
        table[s, e] = g_new[e]
        avg[e] += diff / q
    return r


def lasso_component_grad(cnp.ndarray[cnp.float64_t, ndim=1] row,
                         double y,
                         double beta1,
                         cnp.ndarray[cnp.float64_t, ndim=1] x):
    """Gradient of the ridge-regularized squared residual 1/2 (a'x - y)^2."""
    cdef Py_ssize_t n = row.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] g = np.empty(n, dtype=np.float64)
    cdef double resid = 0.0
    cdef Py_ssize_t e
    for e in range(n):
        resid += row[e] * x[e]
    resid -= y
    for e in range(n):
        g[e] = row[e] * resid + beta1 * x[e]
    return g
