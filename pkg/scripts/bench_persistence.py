#!/usr/bin/env python3
"""Time the persistence sweep across field sizes.

Prints the median wall time per size and the scaling ratio between
consecutive sizes. The first call compiles the kernel, so a warmup run
is excluded from the timings.

Example:
    python3 scripts/bench_persistence.py --sizes 256 512 1024 --reps 5
"""

import argparse
import sys
import time

import numpy as np

from topoloc import make_field
from topoloc.persistence import compute_persistence


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[128, 256, 512, 1024])
    parser.add_argument("--reps", type=int, default=5, help="repetitions per size (default 5)")
    parser.add_argument("--connectivity", type=int, choices=(4, 8), default=4)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    compute_persistence(make_field(8, 8, rng.uniform(0, 1, (8, 8))), args.connectivity)

    prev = None
    print(f"{'size':>6} {'pixels':>9} {'median s':>9} {'pairs':>8} {'ratio':>6}")
    for size in args.sizes:
        field = make_field(size, size, rng.uniform(0, 1, (size, size)))
        times = []
        for _ in range(args.reps):
            t0 = time.perf_counter()
            diagram = compute_persistence(field, args.connectivity)
            times.append(time.perf_counter() - t0)
        med = sorted(times)[len(times) // 2]
        ratio = "" if prev is None else f"{med / prev:.1f}"
        print(f"{size:>6} {size * size:>9} {med:>9.3f} {len(diagram.pairs):>8} {ratio:>6}")
        prev = med
    return 0


if __name__ == "__main__":
    sys.exit(main())
