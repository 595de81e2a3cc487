"""Time the compiled linear recursion against the numpy fallback.

Run ``python3 benchmarks/bench_kernels.py [--periods N] [--repeat R]``. Uses the
benchmark model's predetermined block, so the dimensions match a real simulation.
"""

import argparse
import time
import warnings

import numpy as np

from tanksoe import _kernels_py, build_benchmark_parameters, kernels
from tanksoe.pipeline import solve_model


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--periods", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        first = solve_model(build_benchmark_parameters(), order=1).first
    A = np.ascontiguousarray(first.hx)
    rng = np.random.default_rng(0)
    B = rng.standard_normal((args.periods, A.shape[0])) * 1e-3
    x0 = np.zeros(A.shape[0])

    t_py, ref = best_of(lambda: _kernels_py.linear_recursion(A, B, x0), args.repeat)
    print(f"state dimension {A.shape[0]}, periods {args.periods}")
    print(f"numpy fallback   {t_py:8.3f} s")
    if kernels.BACKEND != "cython":
        print("compiled kernel  not built; reinstall with Cython available")
        return 0
    from tanksoe import _kernels
    t_cy, out = best_of(lambda: _kernels.linear_recursion(A, B, x0), args.repeat)
    print(f"compiled kernel  {t_cy:8.3f} s  (speed-up {t_py / t_cy:.1f}x)")
    print(f"max abs difference {np.max(np.abs(out - ref)):.3e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
