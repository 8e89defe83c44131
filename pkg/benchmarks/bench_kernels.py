"""Time the compiled counting kernel against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py --sizes 1000 10000 100000 --reps 5
"""

import argparse
import statistics
import time

from triefringe import decode_shape, new_source
from triefringe.kernels import MotifTable, available_backends, fringe_counts


def bench(backend, n, reps, source, table):
    times = []
    counts = None
    for r in range(reps):
        start = time.perf_counter()
        out = fringe_counts(r, r << 32, n, source.cdf, table, backend=backend)
        times.append(time.perf_counter() - start)
        counts = out if counts is None else counts
    return statistics.median(times), counts


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[1_000, 10_000, 100_000])
    parser.add_argument("--reps", type=int, default=5)
    args = parser.parse_args()

    source = new_source([0.15, 0.35, 0.35, 0.15])
    table = MotifTable.from_shapes([decode_shape("((LELL)EEL)", 4), decode_shape("(LE(ELLE)L)", 4)], 4)
    backends = available_backends()
    if "cython" not in backends:
        print("compiled kernel not built; only the Python fallback is timed")

    print(f"{'n':>8}  " + "  ".join(f"{b:>12}" for b in backends) + ("  speedup" if len(backends) > 1 else ""))
    for n in args.sizes:
        results = {b: bench(b, n, args.reps, source, table) for b in backends}
        first = {b: c for b, (_, c) in results.items()}
        if len({tuple(c) for c in first.values()}) != 1:
            raise SystemExit(f"backends disagree at n={n}: {first}")
        row = f"{n:>8}  " + "  ".join(f"{results[b][0] * 1e3:>10.2f}ms" for b in backends)
        if len(backends) > 1:
            row += f"  {results['python'][0] / results['cython'][0]:>6.1f}x"
        print(row)


if __name__ == "__main__":
    main()
