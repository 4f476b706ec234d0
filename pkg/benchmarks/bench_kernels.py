#!/usr/bin/env python3
"""Compare the compiled kernels against the pure-numpy fallback.

Run:  python3 benchmarks/bench_kernels.py

The compiled fused loop wins on the small blocks the scorer actually issues
(one pair's prompts at a time); BLAS wins on large dense products, which is
why the dispatcher hands anything above its fused-size limit to numpy.
"""

import time

import numpy as np

from rahp import _kernels
from rahp._kernels import _numpy as np_backend


def bench(fn, *args, repeat=5, warmup=1):
    for _ in range(warmup):
        fn(*args)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    if _kernels._fast is None:
        print("compiled backend not built; nothing to compare")
        return
    rng = np.random.default_rng(0)

    print(f"{'cosine_matrix shape':>28} {'cython':>10} {'numpy':>10} ratio")
    for n, m, d in [(1, 50, 512), (100, 50, 512), (100, 400, 512),
                    (500, 500, 512), (1000, 1000, 512)]:
        a = rng.standard_normal((n, d))
        b = rng.standard_normal((m, d))
        tc = bench(_kernels._fast.cosine_matrix, a, b)
        tn = bench(np_backend.cosine_matrix, a, b)
        print(f"{f'({n}x{d}) @ ({m}x{d})':>28} {tc * 1e3:9.3f}ms "
              f"{tn * 1e3:9.3f}ms {tn / tc:5.2f}x")

    print(f"\n{'assign_clusters shape':>28} {'cython':>10} {'numpy':>10} ratio")
    for n, m, d in [(150, 30, 512), (1000, 30, 128), (5000, 50, 64)]:
        pts = rng.standard_normal((n, d))
        cents = rng.standard_normal((m, d))
        tc = bench(_kernels._fast.assign_clusters, pts, cents)
        tn = bench(np_backend.assign_clusters, pts, cents)
        print(f"{f'{n} pts, {m} cents, d={d}':>28} {tc * 1e3:9.3f}ms "
              f"{tn * 1e3:9.3f}ms {tn / tc:5.2f}x")

    print(f"\ndispatcher backend: {_kernels.BACKEND}, "
          f"fused-size limit: {_kernels._FUSED_LIMIT}")


if __name__ == "__main__":
    main()
