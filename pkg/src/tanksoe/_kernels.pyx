# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled linear recursion used by the simulators."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def linear_recursion(const double[:, ::1] A, const double[:, ::1] B, const double[::1] x0):
    """Return X with X[t] = A @ X[t-1] + B[t] and X[-1] = x0."""
    cdef Py_ssize_t T = B.shape[0], d = B.shape[1]
    cdef Py_ssize_t t, i, j
    cdef double acc
    out = np.empty((T, d), dtype=np.float64)
    cdef double[:, ::1] X = out
    cdef double[::1] prev = np.array(x0, dtype=np.float64)
    for t in range(T):
        for i in range(d):
            acc = B[t, i]
            for j in range(d):
                acc += A[i, j] * prev[j]
            X[t, i] = acc
        prev = X[t]
    return out
