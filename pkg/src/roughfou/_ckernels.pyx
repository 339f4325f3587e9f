# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the hot loops in ``roughfou._pykernels``.

Floating-point operations are performed in the same order as the Python
fallback so the Euler recursion is bit-identical between the two.
"""
import numpy as np
from libc.math cimport pow, sqrt


def euler_path(const double[:, ::1] gamma, const double[::1] x0, const double[:, ::1] noise, double h):
    cdef Py_ssize_t d = gamma.shape[0]
    cdef Py_ssize_t n = noise.shape[1]
    cdef Py_ssize_t ell, i, j
    cdef double acc
    out_arr = np.empty((d, n + 1), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    for i in range(d):
        out[i, 0] = x0[i]
    for ell in range(n):
        for i in range(d):
            acc = 0.0
            for j in range(d):
                acc = acc + gamma[i, j] * out[j, ell]
            out[i, ell + 1] = out[i, ell] - acc * h + noise[i, ell]
    return out_arr


def pvar_level1(const double[:, ::1] xa, const double[:, ::1] xb, double q):
    cdef Py_ssize_t m = xa.shape[0]
    cdef Py_ssize_t d = xa.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double s, diff, cand, best_j
    best_arr = np.zeros(m, dtype=np.float64)
    cdef double[::1] best = best_arr
    for j in range(1, m):
        best_j = -1.0
        for i in range(j):
            s = 0.0
            for k in range(d):
                diff = (xa[j, k] - xa[i, k]) - (xb[j, k] - xb[i, k])
                s = s + diff * diff
            cand = best[i] + pow(sqrt(s), q)
            if cand > best_j:
                best_j = cand
        best[j] = best_j
    return best_arr[m - 1]


def pvar_level2(const double[:, ::1] xa, const double[:, :, ::1] ra,
                const double[:, ::1] xb, const double[:, :, ::1] rb, double q):
    cdef Py_ssize_t m = xa.shape[0]
    cdef Py_ssize_t d = xa.shape[1]
    cdef Py_ssize_t i, j, k, l
    cdef double s, ea, eb, diff, cand, best_j
    best_arr = np.zeros(m, dtype=np.float64)
    cdef double[::1] best = best_arr
    for j in range(1, m):
        best_j = -1.0
        for i in range(j):
            s = 0.0
            for k in range(d):
                for l in range(d):
                    ea = ra[j, k, l] - ra[i, k, l] - (xa[i, k] - xa[0, k]) * (xa[j, l] - xa[i, l])
                    eb = rb[j, k, l] - rb[i, k, l] - (xb[i, k] - xb[0, k]) * (xb[j, l] - xb[i, l])
                    diff = ea - eb
                    s = s + diff * diff
            cand = best[i] + pow(sqrt(s), q)
            if cand > best_j:
                best_j = cand
        best[j] = best_j
    return best_arr[m - 1]
