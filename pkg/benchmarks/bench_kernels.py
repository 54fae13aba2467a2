"""Time the compiled kernels against the numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import timeit

import numpy as np

from robustlab import _pykernels

try:
    from robustlab import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def cases(g):
    Z = g.standard_normal((2000, 20))
    u = g.standard_normal(20)
    u /= np.linalg.norm(u)
    w = np.sort(g.random(2000))
    w /= w.sum()
    P = g.standard_normal((64, 2000))
    A = g.random((64, 400))
    y = g.standard_normal(2000) / 2000
    ind = (g.random(1 << 16) < 0.01).astype(np.uint8)
    return {
        "spread_value_grad n=2000 d=20": lambda k: k.spread_value_grad(Z, u, w),
        "spread_values 64x2000": lambda k: k.spread_values(P, w),
        "capped_min_rows 64x400": lambda k: k.capped_min_rows(A, 320, 1.0 / 320, 0.0),
        "project_capped n=2000": lambda k: k.project_capped(y, 1.0 / 1800),
        "dilate_once n=16": lambda k: k.dilate_once(ind, 16),
        "cube_mass n=16": lambda k: k.cube_mass(ind, 16, 0.3),
    }


def best_of(fn, repeat):
    number = 1
    while timeit.timeit(fn, number=number) < 0.05:
        number *= 2
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    g = np.random.default_rng(0)
    print(f"{'kernel':34s} {'python (ms)':>12s} {'cython (ms)':>12s} {'speedup':>8s}")
    for name, call in cases(g).items():
        tp = best_of(lambda: call(_pykernels), args.repeat) * 1e3
        if _ckernels is None:
            print(f"{name:34s} {tp:12.3f} {'n/a':>12s} {'n/a':>8s}")
            continue
        tc = best_of(lambda: call(_ckernels), args.repeat) * 1e3
        print(f"{name:34s} {tp:12.3f} {tc:12.3f} {tp / tc:8.1f}")


if __name__ == "__main__":
    main()
