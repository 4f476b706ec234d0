# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: fused cosine similarity and k-means assignment.

Loops accumulate in a fixed order (row-major, single thread) so outputs are
reproducible and independent of worker count.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()

NAME = "cython"


def cosine_matrix(const double[:, ::1] a, const double[:, ::1] b):
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t m = b.shape[0]
    cdef Py_ssize_t d = a.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((n, m), dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] nb = np.empty(m, dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef double[::1] nbv = nb
    cdef Py_ssize_t i, j, t
    cdef double acc, na, v

    for j in range(m):
        acc = 0.0
        for t in range(d):
            acc += b[j, t] * b[j, t]
        nbv[j] = sqrt(acc)
    for i in range(n):
        acc = 0.0
        for t in range(d):
            acc += a[i, t] * a[i, t]
        na = sqrt(acc)
        for j in range(m):
            acc = 0.0
            for t in range(d):
                acc += a[i, t] * b[j, t]
            v = acc / (na * nbv[j])
            if v > 1.0:
                v = 1.0
            elif v < -1.0:
                v = -1.0
            o[i, j] = v
    return out


def assign_clusters(const double[:, ::1] points, const double[:, ::1] centroids):
    cdef Py_ssize_t n = points.shape[0]
    cdef Py_ssize_t m = centroids.shape[0]
    cdef Py_ssize_t d = points.shape[1]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] labels = np.empty(n, dtype=np.int64)
    cdef long[::1] lab = labels
    cdef Py_ssize_t i, j, t
    cdef double best, dist, diff, sse = 0.0
    cdef Py_ssize_t best_j

    for i in range(n):
        best = -1.0
        best_j = 0
        for j in range(m):
            dist = 0.0
            for t in range(d):
                diff = points[i, t] - centroids[j, t]
                dist += diff * diff
            if best < 0.0 or dist < best:
                best = dist
                best_j = j
        lab[i] = best_j
        sse += best
    return labels, sse
