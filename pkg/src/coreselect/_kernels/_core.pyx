# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: row-wise Jensen-Shannon scoring and greedy max-min
cover. Semantics (including tie-breaking) match ``_core_py`` exactly."""

import numpy as np

cimport numpy as cnp
from libc.math cimport log

cnp.import_array()


def jsd_to_centers(const double[:, ::1] dists, const double[:, ::1] centers,
                   const cnp.int64_t[::1] labels):
    """Jensen-Shannon divergence of each row of ``dists`` against the center
    row picked by its label. Rows must be strictly positive distributions."""
    cdef Py_ssize_t n = dists.shape[0]
    cdef Py_ssize_t d = dists.shape[1]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] out_v = out
    cdef Py_ssize_t i, w, j
    cdef double p, c, g, acc
    for i in range(n):
        j = <Py_ssize_t> labels[i]
        acc = 0.0
        for w in range(d):
            p = dists[i, w]
            c = centers[j, w]
            g = 0.5 * (p + c)
            acc += p * (log(p) - log(g)) + c * (log(c) - log(g))
        out_v[i] = 0.5 * acc
    return out


def kcenter_greedy(const double[:, ::1] points, Py_ssize_t k, Py_ssize_t start=0):
    """Greedy max-min cover over rows of ``points``; returns row positions in
    selection order. Argmax ties resolve to the lowest row index."""
    cdef Py_ssize_t n = points.shape[0]
    cdef Py_ssize_t d = points.shape[1]
    selected = np.empty(k, dtype=np.int64)
    cdef cnp.int64_t[::1] sel_v = selected
    min_d2 = np.empty(n, dtype=np.float64)
    cdef double[::1] md = min_d2
    cdef Py_ssize_t i, w, step, best
    cdef double acc, diff, best_val

    for i in range(n):
        acc = 0.0
        for w in range(d):
            diff = points[i, w] - points[start, w]
            acc += diff * diff
        md[i] = acc
    md[start] = -1.0
    sel_v[0] = start

    for step in range(1, k):
        best = 0
        best_val = md[0]
        for i in range(1, n):
            if md[i] > best_val:
                best_val = md[i]
                best = i
        sel_v[step] = best
        for i in range(n):
            acc = 0.0
            for w in range(d):
                diff = points[i, w] - points[best, w]
                acc += diff * diff
            if acc < md[i]:
                md[i] = acc
        md[best] = -1.0
    return selected
