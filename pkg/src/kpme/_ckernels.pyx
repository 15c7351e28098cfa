# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled particle/grid kernels; same contracts as ``_kernels_py``."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def lagrange_weights(nodes, t):
    cdef const double[::1] h = np.ascontiguousarray(nodes, dtype=np.float64)
    cdef const double[::1] x = np.ascontiguousarray(t, dtype=np.float64)
    cdef Py_ssize_t L = h.shape[0], n = x.shape[0]
    out = np.empty((n, L), dtype=np.float64)
    cdef double[:, ::1] w = out
    cdef double[::1] denom = np.empty(L, dtype=np.float64)
    cdef Py_ssize_t i, j, k
    cdef double acc
    for k in range(L):
        acc = 1.0
        for j in range(L):
            if j != k:
                acc *= h[k] - h[j]
        denom[k] = acc
    for i in range(n):
        for k in range(L):
            acc = 1.0
            for j in range(L):
                if j != k:
                    acc *= x[i] - h[j]
            w[i, k] = acc / denom[k]
    return out


def spread(wx, wy, wz, q):
    cdef const double[:, ::1] ax = np.ascontiguousarray(wx, dtype=np.float64)
    cdef const double[:, ::1] ay = np.ascontiguousarray(wy, dtype=np.float64)
    cdef const double[:, ::1] az = np.ascontiguousarray(wz, dtype=np.float64)
    cdef const double[::1] qq = np.ascontiguousarray(q, dtype=np.float64)
    cdef Py_ssize_t n = ax.shape[0], L0 = ax.shape[1], L1 = ay.shape[1], L2 = az.shape[1]
    out = np.zeros((L0, L1, L2), dtype=np.float64)
    cdef double[:, :, ::1] g = out
    cdef Py_ssize_t i, a, b, c
    cdef double sa, sab
    for i in range(n):
        for a in range(L0):
            sa = qq[i] * ax[i, a]
            for b in range(L1):
                sab = sa * ay[i, b]
                for c in range(L2):
                    g[a, b, c] += sab * az[i, c]
    return out


def gather(wx, wy, wz, g):
    cdef const double[:, ::1] ax = np.ascontiguousarray(wx, dtype=np.float64)
    cdef const double[:, ::1] ay = np.ascontiguousarray(wy, dtype=np.float64)
    cdef const double[:, ::1] az = np.ascontiguousarray(wz, dtype=np.float64)
    cdef const double[:, :, ::1] gg = np.ascontiguousarray(g, dtype=np.float64)
    cdef Py_ssize_t n = ax.shape[0], L0 = ax.shape[1], L1 = ay.shape[1], L2 = az.shape[1]
    out = np.zeros(n, dtype=np.float64)
    cdef double[::1] v = out
    cdef Py_ssize_t i, a, b, c
    cdef double sb, sc, total
    for i in range(n):
        total = 0.0
        for a in range(L0):
            sb = 0.0
            for b in range(L1):
                sc = 0.0
                for c in range(L2):
                    sc += gg[a, b, c] * az[i, c]
                sb += sc * ay[i, b]
            total += sb * ax[i, a]
        v[i] = total
    return out
