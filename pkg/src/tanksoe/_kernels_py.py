"""Pure-numpy fallback for the compiled kernels."""

import numpy as np


def linear_recursion(A, B, x0):
    """Return X with X[t] = A @ X[t-1] + B[t] and X[-1] = x0."""
    A = np.ascontiguousarray(A, dtype=np.float64)
    B = np.ascontiguousarray(B, dtype=np.float64)
    out = np.empty_like(B)
    prev = np.array(x0, dtype=np.float64)
    for t in range(B.shape[0]):
        prev = A @ prev + B[t]
        out[t] = prev
    return out
