"""Throughput comparison of the numba and numpy kernel backends.

Runs each hot kernel on identical inputs through both implementations and
reports million samples per second.  Numba JIT compilation is excluded by
a warmup pass.  Usage:

    python3 benchmarks/bench_kernels.py [--n 4000000] [--repeats 5]
"""

from __future__ import annotations

import argparse
import math
import time

import numpy as np

from dvsnoise import _kernels


def _best_rate(fn, n_samples: int, repeats: int) -> float:
    fn()  # warmup (JIT compile / cache touch)
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return n_samples / best / 1e6


def build_cases(n: int):
    rng = np.random.default_rng(0)
    a = 0.999
    b = math.sqrt(1.0 - a * a)
    w1 = rng.standard_normal(n)
    w2 = rng.standard_normal((n, 2))
    phi = np.array([[0.95, 0.01], [-0.004, 0.93]])
    chol = np.array([[2e-4, 0.0], [5e-5, 1e-4]])
    x2 = np.zeros(2)
    path, _ = _kernels.ou_chunk(w1, a, b, 0.0)

    return {
        "ou_chunk": lambda impl: impl(w1, a, b, 0.0),
        "linear2_chunk": lambda impl: impl(w2, phi, chol, x2.copy()),
        "scan_chunk": lambda impl: impl(path, 1e-3, 1, 1.5, 1.5, 0.0, 10,
                                        path[0], _kernels.NO_EVENT, False),
        "ou_events_chunk": lambda impl: impl(w1, a, b, 1.5, 10, 0.0, 0.0,
                                             False),
    }


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=4_000_000,
                        help="samples per kernel call")
    parser.add_argument("--repeats", type=int, default=5,
                        help="timed repetitions (best is reported)")
    args = parser.parse_args()

    if not _kernels._numba_impls:
        raise SystemExit("numba backend unavailable; nothing to compare")

    cases = build_cases(args.n)
    print(f"samples per call: {args.n:,}   repeats: {args.repeats}")
    print(f"{'kernel':<18}{'numba Ms/s':>12}{'numpy Ms/s':>12}{'ratio':>8}")
    for name, runner in cases.items():
        nb = _kernels._numba_impls[name]
        np_ = _kernels._numpy_impls[name]
        rate_nb = _best_rate(lambda: runner(nb), args.n, args.repeats)
        rate_np = _best_rate(lambda: runner(np_), args.n, args.repeats)
        print(f"{name:<18}{rate_nb:>12.1f}{rate_np:>12.1f}"
              f"{rate_nb / rate_np:>8.2f}")


if __name__ == "__main__":
    main()
