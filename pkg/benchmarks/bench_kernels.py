"""Compare the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--n 14] [--window 2] [--g 1] [--repeat 3]
"""

import argparse
import time

import numpy as np

from mistake_pressure import _kernels_py
from mistake_pressure.symbolic import admissible_array, full_shift, pack_words

try:
    from mistake_pressure import _kernels
except ImportError:
    _kernels = None


def best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=14)
    ap.add_argument("--window", type=int, default=2)
    ap.add_argument("--g", type=int, default=1)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    words = admissible_array(full_shift(2), args.n + args.window - 1)
    table = pack_words(words, 2)
    order = np.arange(len(table), dtype=np.int64)
    cases = {
        "mismatch_counts": lambda m: m.mismatch_counts(table[0], table, args.n, args.window),
        "greedy_separated": lambda m: m.greedy_separated(table, order, args.n, args.window, args.g),
        "ball_lists": lambda m: m.ball_lists(table, args.n, args.window, args.g, 50_000_000),
    }
    print(f"{len(table)} words, n={args.n}, window={args.window}, g={args.g}")
    print(f"{'kernel':<18}{'python [ms]':>14}{'cython [ms]':>14}{'speedup':>10}")
    for name, call in cases.items():
        tp, ref = best_of(lambda: call(_kernels_py), args.repeat)
        if _kernels is None:
            print(f"{name:<18}{tp * 1e3:>14.2f}{'n/a':>14}{'':>10}")
            continue
        tc, got = best_of(lambda: call(_kernels), args.repeat)
        same = all(np.array_equal(a, b) for a, b in zip(ref, got)) if isinstance(ref, tuple) else np.array_equal(ref, got)
        flag = "" if same else "  MISMATCH"
        print(f"{name:<18}{tp * 1e3:>14.2f}{tc * 1e3:>14.2f}{tp / tc:>9.1f}x{flag}")


if __name__ == "__main__":
    main()
