"""Fourier-Motzkin kernel, pure-Python reference implementation.

A row is ``(coeffs, bound, strict)`` meaning ``sum(coeffs[i] * v_i) <= bound``
(``<`` when strict), with integer coefficients and bound.  ``_fm.pyx`` is a
line-for-line typed copy of this module; keep the two in sync.
"""

from math import gcd


def _primitive(coeffs):
    g = 0
    for c in coeffs:
        g = gcd(g, c)
    return g


def _insert(table, coeffs, bound, strict):
    """Add a row to ``table``; False when the row is trivially infeasible."""
    g = _primitive(coeffs)
    if g == 0:
        if strict:
            return bound > 0
        return bound >= 0
    if g != 1:
        key = tuple([c // g for c in coeffs])
    else:
        key = coeffs
    old = table.get(key)
    if old is None:
        table[key] = (coeffs, bound, strict, g)
        return True
    ob, og = old[1], old[3]
    # compare bound/g against ob/og
    lhs = bound * og
    rhs = ob * g
    if lhs < rhs or (lhs == rhs and strict and not old[2]):
        table[key] = (coeffs, bound, strict, g)
    return True


def _finish(table):
    out = []
    for coeffs, bound, strict, g in table.values():
        h = gcd(g, bound)
        if h > 1:
            coeffs = tuple([c // h for c in coeffs])
            bound //= h
        out.append((coeffs, bound, strict))
    return out


def dedupe(rows):
    """Drop trivial and dominated rows.  Returns None if a row is infeasible."""
    table = {}
    for coeffs, bound, strict in rows:
        if not _insert(table, tuple(coeffs), bound, strict):
            return None
    return _finish(table)


def eliminate(rows, col):
    """Project variable ``col`` out of ``rows``.  None signals infeasibility."""
    pos = []
    neg = []
    table = {}
    for row in rows:
        c = row[0][col]
        if c > 0:
            pos.append(row)
        elif c < 0:
            neg.append(row)
        elif not _insert(table, row[0], row[1], row[2]):
            return None
    for pc, pb, ps in pos:
        a = pc[col]
        for nc, nb, ns in neg:
            b = -nc[col]
            coeffs = tuple([b * x + a * y for x, y in zip(pc, nc)])
            if not _insert(table, coeffs, b * pb + a * nb, ps or ns):
                return None
    return _finish(table)


def count_pairs(rows, col):
    """Number of new rows eliminating ``col`` would create (ordering heuristic)."""
    p = n = 0
    for row in rows:
        c = row[0][col]
        if c > 0:
            p += 1
        elif c < 0:
            n += 1
    return p * n - p - n
