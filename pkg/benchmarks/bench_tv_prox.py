"""Benchmark the TV-prox dual kernel: numba @njit loop vs vectorized numpy.

Run with ``python benchmarks/bench_tv_prox.py``.  The package-level switch
``SDRED_NO_NUMBA=1`` selects the numpy path globally; here both
implementations are timed side by side regardless of the flag.
"""

import time

import numpy as np

from sdred import _kernels as kernels


def time_fn(fn, z, mu, step, iters, repeats=3):
    best = np.inf
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(z, mu, step, iters, 0.0)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    if not kernels.USE_NUMBA:
        print("note: SDRED_NO_NUMBA is set; the jit column still measures the @njit kernel")
    rng = np.random.default_rng(0)
    print(f"{'size':>6} {'inner':>6} {'numpy [ms]':>12} {'numba [ms]':>12} {'speedup':>8}")
    for size in (64, 128, 256):
        z = rng.standard_normal((size, size))
        iters = 200
        # warm the jit cache before timing
        kernels.tv_prox_dual_jit(z, 0.3, 0.125, 2, 0.0)
        t_np, out_np = time_fn(kernels.tv_prox_dual_numpy, z, 0.3, 0.125, iters)
        t_nb, out_nb = time_fn(kernels.tv_prox_dual_jit, z, 0.3, 0.125, iters)
        gap = np.max(np.abs(out_np[0] - out_nb[0]))
        assert gap < 1e-10, f"paths disagree by {gap}"
        print(
            f"{size:>6} {iters:>6} {1e3 * t_np:>12.1f} {1e3 * t_nb:>12.1f} "
            f"{t_np / t_nb:>8.2f}x"
        )


if __name__ == "__main__":
    main()
