#!/usr/bin/env python3
"""Benchmark the compiled kernel core against the pure-Python fallback.

Runs the two hot loops (per-segment gather/reduce, trace-driven LRU cache)
on representative desk-scale workloads and prints the timing ratio.

    python benchmarks/bench_kernels.py [--repeats 5]
"""

import argparse
import time

import numpy as np

from recperf import _kernels
from recperf._kernels import pyref


def best_of(repeats, fn, *args):
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        out = fn(*args)
        times.append(time.perf_counter() - start)
    return min(times), out


def bench_gather_reduce(repeats):
    rng = np.random.default_rng(0)
    rows, dim, gathers, length = 100_000, 32, 200_000, 80
    table = rng.random((rows, dim), dtype=np.float32)
    indices = rng.integers(0, rows, size=gathers).astype(np.int64)
    starts = np.arange(0, gathers + 1, length, dtype=np.int64)

    t_py, out_py = best_of(repeats, pyref.gather_reduce, table, indices, starts)
    results = [("python", t_py)]
    if _kernels.HAVE_COMPILED:
        from recperf._kernels import _core
        t_c, out_c = best_of(repeats, _core.gather_reduce, table, indices, starts)
        np.testing.assert_allclose(out_c, out_py, rtol=1e-12)
        results.append(("compiled", t_c))
    return f"gather_reduce ({gathers} gathers of {dim}-wide rows)", results


def bench_lru(repeats):
    rng = np.random.default_rng(1)
    accesses, span = 500_000, 2_000_000
    lines = rng.integers(0, span, size=accesses).astype(np.int64)
    num_sets, ways = 1024, 16  # 1 MiB at 64-byte lines

    def run(cls):
        cache = cls(num_sets, ways)
        return cache.run(lines)

    t_py, out_py = best_of(repeats, run, pyref.LruCache)
    results = [("python", t_py)]
    if _kernels.HAVE_COMPILED:
        from recperf._kernels import _core
        t_c, out_c = best_of(repeats, run, _core.LruCache)
        assert out_c == out_py, "backends disagree"
        results.append(("compiled", t_c))
    return f"lru_cache ({accesses} accesses, {num_sets}x{ways} ways)", results


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    print(f"kernel backend in use: {_kernels.backend_name()}")
    if not _kernels.HAVE_COMPILED:
        print("compiled core not built; timing the fallback only\n")

    for bench in (bench_gather_reduce, bench_lru):
        label, results = bench(args.repeats)
        print(f"\n{label}")
        base = dict(results).get("python")
        for name, seconds in results:
            ratio = f"  ({base / seconds:5.1f}x vs python)" if name == "compiled" else ""
            print(f"  {name:9s} {seconds * 1e3:9.2f} ms{ratio}")


if __name__ == "__main__":
    main()
