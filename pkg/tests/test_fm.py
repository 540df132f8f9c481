import importlib.util
import itertools
import os
import random
import subprocess
import sys
from fractions import Fraction

import pytest

from cyclomc import _fm_py, fm

HAS_EXT = importlib.util.find_spec("cyclomc._fm") is not None


def random_rows(rng, nvars, count, coeff=4, const=6):
    rows = []
    for _ in range(count):
        coeffs = tuple(rng.randint(-coeff, coeff) for _ in range(nvars))
        rows.append((coeffs, rng.randint(-const, const), rng.random() < 0.3))
    return rows


def canon(rows):
    return None if rows is None else sorted(rows)


def holds(rows, point):
    for coeffs, bound, strict in rows:
        s = sum(c * v for c, v in zip(coeffs, point))
        if s > bound or (strict and s == bound):
            return False
    return True


def exists_in_column(rows, col, point):
    """Is there a rational value for ``col`` satisfying all rows?  Interval test."""
    lows, highs = [], []
    for coeffs, bound, strict in rows:
        rest = sum(c * v for i, (c, v) in enumerate(zip(coeffs, point)) if i != col)
        a = coeffs[col]
        if a == 0:
            if rest > bound or (strict and rest == bound):
                return False
        elif a > 0:
            highs.append((Fraction(bound - rest, a), strict))
        else:
            lows.append((Fraction(bound - rest, a), strict))
    if not lows or not highs:
        return True
    lo = max(b for b, _ in lows)
    hi = min(b for b, _ in highs)
    open_end = any(s for b, s in lows if b == lo) or any(s for b, s in highs if b == hi)
    return lo < hi or (lo == hi and not open_end)


def test_backend_flag():
    assert fm.BACKEND in ("cython", "python")
    if HAS_EXT and not os.environ.get("CYCLOMC_PURE_PYTHON"):
        assert fm.BACKEND == "cython"


def test_pure_python_switch():
    env = dict(os.environ, CYCLOMC_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from cyclomc import fm; print(fm.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_dedupe_examples():
    rows = [((2, 0), 4, False), ((1, 0), 3, False), ((0, 0), 1, False), ((1, 0), 2, True)]
    assert canon(_fm_py.dedupe(rows)) == [((1, 0), 2, True)]
    assert _fm_py.dedupe([((0, 0), -1, False)]) is None
    assert _fm_py.dedupe([((0, 0), 0, True)]) is None


def test_eliminate_example():
    # x - y <= 0, -x <= -3  gives  -y <= -3
    rows = [((1, -1), 0, False), ((-1, 0), -3, False)]
    assert _fm_py.eliminate(rows, 0) == [((0, -1), -3, False)]
    # x < 1, -x < -1 is infeasible
    assert _fm_py.eliminate([((1,), 1, True), ((-1,), -1, True)], 0) is None
    assert _fm_py.count_pairs(rows, 0) == -1


def test_eliminate_is_exact_projection():
    rng = random.Random(51)
    grid = [Fraction(i, 2) for i in range(-6, 7)]
    for _ in range(300):
        rows = random_rows(rng, 2, rng.randint(1, 6))
        out = _fm_py.eliminate(rows, 0)
        for y in grid:
            expect = exists_in_column(rows, 0, (0, y))
            got = out is not None and holds(out, (0, y))
            assert got == expect, (rows, out, y)


@pytest.mark.skipif(not HAS_EXT, reason="compiled kernel not built")
def test_kernels_agree():
    from cyclomc import _fm
    rng = random.Random(52)
    for _ in range(2000):
        n = rng.randint(1, 4)
        rows = random_rows(rng, n, rng.randint(0, 8))
        col = rng.randrange(n)
        assert canon(_fm.dedupe(rows)) == canon(_fm_py.dedupe(rows))
        assert canon(_fm.eliminate(rows, col)) == canon(_fm_py.eliminate(rows, col))
        assert _fm.count_pairs(rows, col) == _fm_py.count_pairs(rows, col)


@pytest.mark.skipif(not HAS_EXT, reason="compiled kernel not built")
def test_kernels_agree_on_big_integers():
    from cyclomc import _fm
    rows = [((10**30, -3), 10**40, False), ((-7, 2 * 10**25), -(10**33), True), ((1, 1), 5, False)]
    for col in (0, 1):
        assert canon(_fm.eliminate(rows, col)) == canon(_fm_py.eliminate(rows, col))


def test_dedupe_preserves_solutions():
    rng = random.Random(53)
    pts = list(itertools.product(range(-3, 4), repeat=2))
    for _ in range(300):
        rows = random_rows(rng, 2, rng.randint(1, 6))
        out = fm.dedupe(rows)
        for p in pts:
            assert holds(rows, p) == (out is not None and holds(out, p))
