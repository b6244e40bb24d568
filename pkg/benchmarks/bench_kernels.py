"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import timeit

import numpy as np

from quantkit import _kernels_py

try:
    from quantkit import _kernels
except ImportError:
    _kernels = None


def cases(rng):
    y = np.cumsum(rng.normal(size=5000))
    kinds = np.array([0, 1, 0, 1, 2, 3] * 4, dtype=np.int64)
    qty = rng.normal(size=kinds.size)
    strikes = rng.uniform(80, 120, kinds.size)
    entries = np.where(kinds == 2, 100.0, 0.0)
    grid = np.linspace(0, 300, 10_001)
    py = rng.normal(size=2000)
    pw = rng.uniform(0.5, 2, 2000)
    return {
        "hp_solve n=5000": lambda m: m.hp_solve(y, 14400.0),
        "payoff_grid 24 legs x 10001": lambda m: m.payoff_grid(kinds, qty, strikes, entries, grid),
        "pav_decreasing n=2000": lambda m: m.pav_decreasing(py, pw),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=20)
    a = ap.parse_args()
    rng = np.random.default_rng(42)
    print(f"{'kernel':32s} {'python ms':>10s} {'cython ms':>10s} {'speedup':>8s}")
    for name, fn in cases(rng).items():
        t_py = min(timeit.repeat(lambda: fn(_kernels_py), number=1, repeat=a.repeat)) * 1e3
        if _kernels is None:
            print(f"{name:32s} {t_py:10.3f} {'n/a':>10s} {'n/a':>8s}")
            continue
        t_cy = min(timeit.repeat(lambda: fn(_kernels), number=1, repeat=a.repeat)) * 1e3
        print(f"{name:32s} {t_py:10.3f} {t_cy:10.3f} {t_py / t_cy:8.1f}x")


if __name__ == "__main__":
    main()
