"""Compare the compiled Fourier-Motzkin kernel with the pure-Python fallback.

    python benchmarks/bench_fm.py [--rows 24] [--vars 4] [--cases 200] [--repeat 5]

Both kernels run on the same seeded random row systems; results are checked
for equality before timing.
"""

import argparse
import random
import sys
import timeit

from cyclomc import _fm_py

try:
    from cyclomc import _fm
except ImportError:
    _fm = None


def random_rows(rng, nvars, count, coeff=6, const=20):
    return [(tuple(rng.randint(-coeff, coeff) for _ in range(nvars)), rng.randint(-const, const),
             rng.random() < 0.3) for _ in range(count)]


def workload(kernel, cases):
    for rows, col in cases:
        kernel.dedupe(rows)
        kernel.eliminate(rows, col)
        kernel.count_pairs(rows, col)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=24)
    ap.add_argument("--vars", type=int, default=4)
    ap.add_argument("--cases", type=int, default=200)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    if _fm is None:
        print("compiled kernel not built; run `pip install -e . --no-build-isolation` first")
        return 1
    rng = random.Random(args.seed)
    cases = [(random_rows(rng, args.vars, args.rows), rng.randrange(args.vars)) for _ in range(args.cases)]
    for rows, col in cases:
        a, b = _fm.eliminate(rows, col), _fm_py.eliminate(rows, col)
        assert (a is None and b is None) or sorted(a) == sorted(b)

    times = {}
    for name, kernel in (("python", _fm_py), ("cython", _fm)):
        times[name] = min(timeit.repeat(lambda k=kernel: workload(k, cases), number=1, repeat=args.repeat))
        print(f"{name:7s} {times[name] * 1000:9.1f} ms  ({args.cases} cases, {args.rows} rows, {args.vars} vars)")
    print(f"speedup {times['python'] / times['cython']:.2f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
