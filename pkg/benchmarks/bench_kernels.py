"""Benchmark the per-point hot kernels: numba jit vs pure numpy.

Runs each kernel on random inputs across point counts and reports ns/point
for both backends plus the speedup.  The package itself picks its backend at
import time (TWOVIEW_NUMBA=0 forces numpy); this script imports both
implementations directly so the comparison does not depend on the flag.

Usage: python3 benchmarks/bench_kernels.py [--sizes 1000,10000,100000] [--repeats 7]
"""

import argparse
import time

import numpy as np

from twoview.kernels import numpy_impl

try:
    from twoview.kernels import numba_impl
except ImportError:
    numba_impl = None


def _best_of(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _cases(n, rng):
    pts = np.ascontiguousarray(rng.uniform(0, 1000, size=(n, 4)))
    Hm = np.ascontiguousarray(np.eye(3) + 0.1 * rng.normal(size=(3, 3)))
    Hinv = np.ascontiguousarray(np.linalg.inv(Hm))
    F = np.ascontiguousarray(rng.normal(size=(3, 3)))
    r = np.abs(rng.normal(0.0, 10.0, size=n))
    table = np.ascontiguousarray(np.linspace(1.0, 0.0, 4097))
    return {
        "homography_residuals": lambda impl: impl.homography_residuals(Hm, Hinv, pts),
        "sampson_residuals": lambda impl: impl.sampson_residuals(F, pts),
        "table_interp": lambda impl: impl.table_interp(r, table, 0.01, 0.0),
        "rho_loss_sum": lambda impl: impl.rho_loss_sum(r, table, 0.01, 1.0),
        "truncated_quadratic_sum": lambda impl: impl.truncated_quadratic_sum(r, 5.0),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="1000,10000,100000")
    ap.add_argument("--repeats", type=int, default=7)
    args = ap.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]
    rng = np.random.default_rng(0)

    if numba_impl is None:
        print("numba unavailable: showing the numpy path only")

    header = f"{'kernel':<26}{'n':>9}{'numpy ns/pt':>14}{'numba ns/pt':>14}{'speedup':>9}"
    print(header)
    print("-" * len(header))
    for n in sizes:
        cases = _cases(n, rng)
        for name, call in cases.items():
            t_np = _best_of(lambda: call(numpy_impl), args.repeats)
            if numba_impl is not None:
                call(numba_impl)  # trigger jit before timing
                t_nb = _best_of(lambda: call(numba_impl), args.repeats)
                print(f"{name:<26}{n:>9}{t_np / n * 1e9:>14.1f}"
                      f"{t_nb / n * 1e9:>14.1f}{t_np / t_nb:>8.1f}x")
            else:
                print(f"{name:<26}{n:>9}{t_np / n * 1e9:>14.1f}{'-':>14}{'-':>9}")
    if numba_impl is not None:
        # sanity: both paths agree on a shared input
        pts = np.ascontiguousarray(rng.uniform(0, 1000, size=(256, 4)))
        Hm = np.ascontiguousarray(np.eye(3) + 0.05 * rng.normal(size=(3, 3)))
        Hinv = np.ascontiguousarray(np.linalg.inv(Hm))
        a = numpy_impl.homography_residuals(Hm, Hinv, pts)
        b = numba_impl.homography_residuals(Hm, Hinv, pts)
        print(f"\nbackend agreement (max rel diff): "
              f"{np.max(np.abs(a - b) / np.maximum(a, 1e-30)):.2e}")


if __name__ == "__main__":
    main()
