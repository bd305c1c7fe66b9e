# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernels for boosted-tree fitting and prediction.

Must stay operation-for-operation in sync with ``_splitcore_py.py``: the two
kernels are interchangeable and tested for bit-identical output.
"""

import numpy as np

from libc.math cimport INFINITY


def scan_splits(double[:, ::1] x_sorted, double[:, ::1] r_sorted,
                int min_child, double node_sse):
    """Best axis-aligned split over presorted columns; see the numpy twin."""
    cdef Py_ssize_t m = x_sorted.shape[0]
    cdef Py_ssize_t n_features = x_sorted.shape[1]
    if m < 2 * min_child:
        return -1, 0.0

    cdef Py_ssize_t f, k
    cdef Py_ssize_t best_flat = -1
    cdef double best_gain = -INFINITY
    cdef double total, ls, rs, nl, nr, base, gain

    for f in range(n_features):
        total = 0.0
        for k in range(m):
            total += r_sorted[k, f]
        base = total * total / m
        ls = 0.0
        for k in range(m - 1):
            ls += r_sorted[k, f]
            if k + 1 < min_child:
                continue
            if m - k - 1 < min_child:
                break
            if not (x_sorted[k, f] < x_sorted[k + 1, f]):
                continue
            nl = <double> (k + 1)
            nr = <double> (m - k - 1)
            rs = total - ls
            gain = ls * ls / nl + rs * rs / nr - base
            if gain > best_gain:
                best_gain = gain
                best_flat = f * (m - 1) + k

    if best_flat < 0 or best_gain <= 1e-12 * node_sse or best_gain <= 0.0:
        return -1, 0.0
    return best_flat, best_gain


def predict_ensemble(double[:, :] x, int[::1] feature, double[::1] threshold,
                     int[::1] left, int[::1] right, double[::1] value,
                     long[::1] offsets, double base, double learning_rate):
    """Walk every (flattened) tree per row: base + lr * sum of leaf values.

    ``offsets[t]`` is tree t's first node; child indices are tree-local.
    """
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t n_trees = offsets.shape[0] - 1
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, t, node, off
    cdef double acc
    for i in range(n):
        acc = base
        for t in range(n_trees):
            off = offsets[t]
            node = 0
            while feature[off + node] >= 0:
                if x[i, feature[off + node]] <= threshold[off + node]:
                    node = left[off + node]
                else:
                    node = right[off + node]
            acc = acc + learning_rate * value[off + node]
        out[i] = acc
    return out_arr
