# cython: language_level=3, boundscheck=False, wraparound=False
"""Fourier-Motzkin kernel, compiled.  Mirrors _fm_py.py exactly."""

from math import gcd


cdef object _primitive(tuple coeffs):
    cdef object g = 0
    cdef object c
    for c in coeffs:
        g = gcd(g, c)
    return g


cdef bint _insert(dict table, tuple coeffs, object bound, bint strict):
    cdef object g = _primitive(coeffs)
    cdef tuple key
    cdef object old, lhs, rhs
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
    lhs = bound * old[3]
    rhs = old[1] * g
    if lhs < rhs or (lhs == rhs and strict and not old[2]):
        table[key] = (coeffs, bound, strict, g)
    return True


cdef list _finish(dict table):
    cdef list out = []
    cdef object coeffs, bound, g, h
    cdef bint strict
    for coeffs, bound, strict, g in table.values():
        h = gcd(g, bound)
        if h > 1:
            coeffs = tuple([c // h for c in coeffs])
            bound = bound // h
        out.append((coeffs, bound, strict))
    return out


def dedupe(rows):
    cdef dict table = {}
    for coeffs, bound, strict in rows:
        if not _insert(table, tuple(coeffs), bound, strict):
            return None
    return _finish(table)


def eliminate(rows, Py_ssize_t col):
    cdef list pos = []
    cdef list neg = []
    cdef dict table = {}
    cdef tuple row, pc, nc, coeffs
    cdef object a, b, c, pb, nb
    cdef bint ps, ns
    cdef Py_ssize_t i, m
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
        m = len(pc)
        for nc, nb, ns in neg:
            b = -nc[col]
            coeffs = tuple([b * pc[i] + a * nc[i] for i in range(m)])
            if not _insert(table, coeffs, b * pb + a * nb, ps or ns):
                return None
    return _finish(table)


def count_pairs(rows, Py_ssize_t col):
    cdef Py_ssize_t p = 0, n = 0
    cdef tuple row
    for row in rows:
        c = row[0][col]
        if c > 0:
            p += 1
        elif c < 0:
            n += 1
    return p * n - p - n
