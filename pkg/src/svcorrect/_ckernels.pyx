# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled DTW recurrences. Mirrors ``_pykernels`` exactly."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def accumulate(const double[:, ::1] cost):
    """Cumulative cost for steps (1,0), (0,1), (1,1)."""
    cdef Py_ssize_t n = cost.shape[0], m = cost.shape[1], i, j
    cdef double best, up, left
    acc_arr = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] acc = acc_arr
    if n == 0 or m == 0:
        return acc_arr
    acc[0, 0] = cost[0, 0]
    for j in range(1, m):
        acc[0, j] = cost[0, j] + acc[0, j - 1]
    for i in range(1, n):
        acc[i, 0] = cost[i, 0] + acc[i - 1, 0]
        for j in range(1, m):
            best = acc[i - 1, j - 1]
            up = acc[i - 1, j]
            left = acc[i, j - 1]
            if up < best:
                best = up
            if left < best:
                best = left
            acc[i, j] = cost[i, j] + best
    return acc_arr


def backtrack(const double[:, ::1] acc):
    """Optimal path from (0, 0) to (n-1, m-1); ties prefer diagonal, then (1,0)."""
    cdef Py_ssize_t n = acc.shape[0], m = acc.shape[1]
    cdef Py_ssize_t i = n - 1, j = m - 1, k = 0
    cdef double diag, up, left
    out_arr = np.empty((n + m - 1, 2), dtype=np.intp)
    cdef Py_ssize_t[:, ::1] out = out_arr
    out[0, 0] = i
    out[0, 1] = j
    while i > 0 or j > 0:
        if i == 0:
            j -= 1
        elif j == 0:
            i -= 1
        else:
            diag = acc[i - 1, j - 1]
            up = acc[i - 1, j]
            left = acc[i, j - 1]
            if diag <= up and diag <= left:
                i -= 1
                j -= 1
            elif up <= left:
                i -= 1
            else:
                j -= 1
        k += 1
        out[k, 0] = i
        out[k, 1] = j
    return out_arr[k::-1].copy()
