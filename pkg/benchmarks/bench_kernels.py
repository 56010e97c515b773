"""Time the numba kernels against their pure-numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from patchgraph import kernels
from patchgraph._accel import HAVE_NUMBA


def cases():
    rng = np.random.default_rng(0)
    xp = np.pad(rng.normal(size=(32, 64, 64)), ((0, 0), (1, 1), (1, 1)))
    cols = kernels.im2col_numpy(xp, 3, 1)
    sym = rng.normal(size=(128, 128))
    sym = sym + sym.T

    def sweep(fn):
        def run():
            a, v = sym.copy(), np.eye(len(sym))
            fn(a, v)
        return run

    yield ("im2col 32x66x66 k3", lambda: kernels.im2col_numpy(xp, 3, 1),
           lambda: kernels.im2col_numba(xp, 3, 1))
    yield ("col2im 32x66x66 k3", lambda: kernels.col2im_numpy(cols, xp.shape, 3, 1),
           lambda: kernels.col2im_numba(cols, xp.shape, 3, 1))
    yield ("jacobi sweep 128x128", sweep(kernels.jacobi_sweep_numpy),
           sweep(kernels.jacobi_sweep_numba))


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    if not HAVE_NUMBA:
        print("numba unavailable (or PATCHGRAPH_DISABLE_NUMBA set); numpy timings only")
    print(f"{'kernel':24s} {'numpy ms':>10s} {'numba ms':>10s} {'speedup':>8s}")
    for name, numpy_fn, numba_fn in cases():
        t_np = min(timeit.repeat(numpy_fn, number=1, repeat=args.repeat)) * 1e3
        if HAVE_NUMBA:
            numba_fn()  # compile outside the timing
            t_nb = min(timeit.repeat(numba_fn, number=1, repeat=args.repeat)) * 1e3
            print(f"{name:24s} {t_np:10.2f} {t_nb:10.2f} {t_np / t_nb:7.1f}x")
        else:
            print(f"{name:24s} {t_np:10.2f} {'-':>10s}")


if __name__ == "__main__":
    main()
