"""Kernel dispatch: the compiled extension when it was built, numpy otherwise.

Set ``TANKSOE_PURE_PYTHON=1`` to force the fallback.
"""

import os

import numpy as np

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py
if os.environ.get("TANKSOE_PURE_PYTHON", "") not in ("1", "true"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]
        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py


def linear_recursion(A, B, x0=None) -> np.ndarray:
    """``X[t] = A X[t-1] + B[t]`` for ``t = 0..T-1`` with ``X[-1] = x0`` (zeros by default)."""
    A = np.ascontiguousarray(A, dtype=np.float64)
    B = np.ascontiguousarray(B, dtype=np.float64)
    if B.ndim != 2 or A.shape != (B.shape[1], B.shape[1]):
        raise ValueError(f"shape mismatch: A {A.shape}, B {B.shape}")
    x0 = np.zeros(B.shape[1]) if x0 is None else np.ascontiguousarray(x0, dtype=np.float64)
    if B.shape[0] == 0:
        return B.copy()
    return _impl.linear_recursion(A, B, x0)
