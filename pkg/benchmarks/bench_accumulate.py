"""Compare the compiled accumulation kernel with the numpy fallback.

Usage::

    python3 benchmarks/bench_accumulate.py [--n 200000] [--repeat 5]

Prints samples per second for each kernel and dimension, and the largest
relative difference between the two kernels' sums.
"""

import argparse
import timeit

import numpy as np

from isstop import _backend
from isstop.samples import SuffStats, WeightedBatch, accumulate

FIELDS = ("Sw", "Sw2", "Swh", "Sw2h", "Sawh", "Swhh", "Sw2hh")


def _max_rel_diff(a, b):
    worst = 0.0
    for name in FIELDS:
        x, y = np.asarray(getattr(a, name)), np.asarray(getattr(b, name))
        worst = max(worst, float(np.max(np.abs(x - y)) / max(np.max(np.abs(y)), 1e-300)))
    return worst


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=200_000)
    ap.add_argument("--batch", type=int, default=500, help="rows per accumulate call")
    ap.add_argument("--dims", default="1,2,5,10")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    kernels = {"fallback": _backend.fallback_accumulate_into}
    if _backend.compiled_accumulate_into is None:
        print("compiled kernel not available; timing the fallback only")
    else:
        kernels["compiled"] = _backend.compiled_accumulate_into

    rng = np.random.default_rng(0)
    print(f"{'p':>3} {'batch':>6} " + " ".join(f"{k + ' [rows/s]':>20}" for k in kernels)
          + f" {'speedup':>8} {'max rel diff':>13}")
    for p in (int(d) for d in args.dims.split(",")):
        h = rng.normal(size=(args.n, p))
        w = rng.lognormal(sigma=1.5, size=args.n)
        batches = [WeightedBatch(h[i:i + args.batch], w[i:i + args.batch])
                   for i in range(0, args.n, args.batch)]

        def run(kernel):
            s = SuffStats.empty(p)
            for b in batches:
                s = accumulate(s, b, kernel=kernel)
            return s

        rate, result = {}, {}
        for name, kernel in kernels.items():
            best = min(timeit.repeat(lambda: run(kernel), number=1, repeat=args.repeat))
            rate[name] = args.n / best
            result[name] = run(kernel)
        line = f"{p:>3} {args.batch:>6} " + " ".join(f"{rate[k]:>20.3e}" for k in kernels)
        if "compiled" in kernels:
            line += (f" {rate['compiled'] / rate['fallback']:>8.2f}"
                     f" {_max_rel_diff(result['compiled'], result['fallback']):>13.2e}")
        print(line)


if __name__ == "__main__":
    main()
