"""Pure-numpy implementations of the hot-loop kernels.

Same contracts as the compiled versions in ``_core.pyx``.  Accumulations run
in the same (row-major, sender-sorted) order as the compiled code so that
both implementations agree; elementwise kernels agree bit-for-bit, kernels
built on dot products agree to rounding because BLAS may reduce in a
different order.
"""

import numpy as np

IMPL = "fallback"


def soft_threshold(v, t):
    """Coordinate-wise soft-threshold: sign(v) * max(|v| - t, 0)."""
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def penalty_direction_sum(x_i, payloads, a_norm):
    """Sum of a-norm subgradients of ||x_i - z_j|| over the payload rows.

    ``payloads`` is a (deg, n) array in sender-sorted order; rows are
    accumulated in that order.  a_norm 1 gives coordinate signs (0 at 0),
    a_norm 2 gives the unit direction (0 at the origin).
    """
    acc = np.zeros_like(x_i)
    if a_norm == 1:
        for j in range(payloads.shape[0]):
            acc += np.sign(x_i - payloads[j])
    elif a_norm == 2:
        for j in range(payloads.shape[0]):
            d = x_i - payloads[j]
            nrm = np.sqrt(np.dot(d, d))
            if nrm > 0.0:
                acc += d / nrm
    else:
        raise ValueError(f"a_norm must be 1 or 2, got {a_norm}")
    return acc


def saga_update(table, avg, g_new, s):
    """One SAGA table transaction at slot ``s``.

    Returns r = g_new - table[s] + avg computed with the pre-update table,
    then overwrites table[s] with g_new and refreshes the running average
    incrementally: avg += (g_new - table[s]) / q.
    """
    old = table[s]
    diff = g_new - old
    r = diff + avg
    table[s] = g_new
    avg += diff / table.shape[0]
    return r


def lasso_component_grad(row, y, beta1, x):
    """Gradient of the ridge-regularized squared residual 1/2 (a'x - y)^2."""
    return row * (np.dot(row, x) - y) + beta1 * x
