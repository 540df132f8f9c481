"""Decision procedure for conjunctions of linear literals.

Equalities are removed by Gaussian substitution, the remaining inequalities
are decided with Fourier-Motzkin, and a model is rebuilt by back-substitution
choosing, for each variable, the value closest to zero (integers preferred).
Disequalities and integrality are handled by case splitting with a node
budget; running out of budget raises Undecided.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Iterator, Sequence
from fractions import Fraction

from cyclomc import fm
from cyclomc.logic import (
    FALSE,
    TRUE,
    And,
    Atom,
    Formula,
    LinExpr,
    Model,
    Or,
    QuantifierError,
    Sort,
    Var,
    mk_atom,
    nnf,
)

DEFAULT_NODE_BUDGET = 4000


class Undecided(Exception):
    """The integer case split ran out of budget."""


def _expr(a: Atom) -> LinExpr:
    return LinExpr(a.coeffs, -a.bound)


def _row(e: LinExpr, cols: dict[Var, int], strict: bool):
    scale = e.const.denominator
    for _, c in e.coeffs:
        scale = scale * c.denominator // math.gcd(scale, c.denominator)
    coeffs = [0] * len(cols)
    for v, c in e.coeffs:
        coeffs[cols[v]] = int(c * scale)
    return (tuple(coeffs), int(-e.const * scale), strict)


def _pick_value(lo, lo_s, hi, hi_s, is_int: bool) -> Fraction:
    """Value in the interval closest to zero, preferring integers."""
    def ok(x):
        if lo is not None and (x < lo or (x == lo and lo_s)):
            return False
        if hi is not None and (x > hi or (x == hi and hi_s)):
            return False
        return True

    if ok(Fraction(0)):
        return Fraction(0)
    if lo is not None and lo >= 0:
        k = Fraction(math.floor(lo) + 1) if lo_s or lo.denominator != 1 else lo
        if ok(k):
            return k
        if not lo_s:
            return lo
        return (lo + hi) / 2
    k = Fraction(math.ceil(hi) - 1) if hi_s or hi.denominator != 1 else hi
    if ok(k):
        return k
    if not hi_s:
        return hi
    return (lo + hi) / 2


def _solve_relaxed(eqs: list[LinExpr], ineqs: list[tuple[LinExpr, bool]], vars_: Sequence[Var]):
    """Rational solution of eqs (=0) and ineqs (<=0 or <0), or None."""
    pivots: list[tuple[Var, LinExpr]] = []
    sub: dict[Var, LinExpr] = {}
    for e in eqs:
        e = e.substitute(sub) if sub else e
        if e.is_const:
            if e.const != 0:
                return None
            continue
        # prefer a unit coefficient so integer models stay integral
        v, c = min(e.coeffs, key=lambda p: (abs(p[1]) != 1, abs(p[1]), p[0].key))
        rhs = -(e - LinExpr(((v, c),))) / c
        for i, (w, t) in enumerate(pivots):
            pivots[i] = (w, t.substitute({v: rhs}))
        sub = {w: t for w, t in pivots}
        pivots.append((v, rhs))
        sub[v] = rhs
    free = [v for v in vars_ if v not in sub]
    cols = {v: i for i, v in enumerate(free)}
    rows = []
    for e, strict in ineqs:
        e = e.substitute(sub) if sub else e
        if e.is_const:
            if e.const > 0 or (strict and e.const == 0):
                return None
            continue
        rows.append(_row(e, cols, strict))
    rows = fm.dedupe(rows)
    if rows is None:
        return None
    stages = []
    remaining = set(range(len(free)))
    while True:
        live = [i for i in sorted(remaining) if any(r[0][i] for r in rows)]
        if not live:
            break
        col = min(live, key=lambda i: fm.count_pairs(rows, i))
        stages.append((col, rows))
        remaining.discard(col)
        rows = fm.eliminate(rows, col)
        if rows is None:
            return None
    values = [Fraction(0)] * len(free)
    for col, rows_before in reversed(stages):
        lo = hi = None
        lo_s = hi_s = False
        for coeffs, bound, strict in rows_before:
            a = coeffs[col]
            if a == 0:
                continue
            rest = sum((c * values[i] for i, c in enumerate(coeffs) if c and i != col), Fraction(0))
            lim = (bound - rest) / a
            if a > 0:
                if hi is None or lim < hi or (lim == hi and strict):
                    hi, hi_s = lim, strict
            else:
                if lo is None or lim > lo or (lim == lo and strict):
                    lo, lo_s = lim, strict
        values[col] = _pick_value(lo, lo_s, hi, hi_s, free[col].sort is Sort.INT)
    assign = {v: values[i] for i, v in enumerate(free)}
    for v, t in reversed(pivots):
        assign[v] = t.evaluate(assign)
    return assign


class _Budget:
    __slots__ = ("left",)

    def __init__(self, n: int):
        self.left = n


def _split_lits(lits: Iterable[Atom]):
    eqs, ineqs, diseqs = [], [], []
    for a in lits:
        if a.op == "=":
            eqs.append(_expr(a))
        elif a.op == "!=":
            diseqs.append(a)
        else:
            ineqs.append((_expr(a), a.op == "<"))
    return eqs, ineqs, diseqs


def _solve(lits: list[Atom], vars_: Sequence[Var], integral: bool, budget: _Budget):
    budget.left -= 1
    if budget.left < 0:
        raise Undecided("case-split budget exhausted")
    eqs, ineqs, diseqs = _split_lits(lits)
    assign = _solve_relaxed(eqs, ineqs, vars_)
    if assign is None:
        return None
    for a in diseqs:
        val = sum((c * assign[v] for v, c in a.coeffs), Fraction(0))
        if val == a.bound:
            rest = [b for b in lits if b is not a]
            for branch in (mk_atom("<", a.lhs, a.bound), mk_atom(">", a.lhs, a.bound)):
                if branch == FALSE:
                    continue
                sub = rest if branch == TRUE else rest + [branch]
                res = _solve(sub, vars_, integral, budget)
                if res is not None:
                    return res
            return None
    if integral:
        for v in vars_:
            if v.sort is Sort.INT and assign[v].denominator != 1:
                val = assign[v]
                down = mk_atom("<=", v, math.floor(val))
                up = mk_atom(">=", v, math.ceil(val))
                order = (down, up) if val > 0 else (up, down)
                for branch in order:
                    res = _solve(lits + [branch], vars_, integral, budget)
                    if res is not None:
                        return res
                return None
    return assign


def cube_model(lits: Iterable[Atom], integral: bool = True, budget: int = DEFAULT_NODE_BUDGET,
               extra_vars: Iterable[Var] = ()) -> Model | None:
    """A model of the conjunction of ``lits`` or None when it is unsatisfiable.

    With ``integral`` false, Int-sorted variables range over the rationals and
    the returned model may not be a valid Model for them; a plain dict is
    returned in that case.
    """
    lits = [a for a in lits if a != TRUE]
    if any(a == FALSE for a in lits):
        return None
    vs = set(extra_vars)
    for a in lits:
        vs.update(a.free_vars)
    vars_ = sorted(vs, key=lambda v: v.key)
    assign = _solve(list(lits), vars_, integral, _Budget(budget))
    if assign is None:
        return None
    for v in vars_:
        assign.setdefault(v, Fraction(0))
    return Model(assign) if integral else assign


def feasible(lits: Iterable[Atom], integral: bool = True, budget: int = DEFAULT_NODE_BUDGET) -> bool:
    """Satisfiability of a cube.  Undecided integer cubes count as feasible."""
    try:
        return cube_model(lits, integral, budget) is not None
    except Undecided:
        return True


def iter_cubes(f: Formula, integral: bool = True, prune: bool = True,
               budget: int = DEFAULT_NODE_BUDGET, check_leaves: bool = True) -> Iterator[list[Atom]]:
    """Enumerate the satisfiable cubes of the DNF of a quantifier-free formula.

    Branches are pruned as soon as the literals collected so far are
    rationally infeasible.  Leaves are checked with ``integral``; leaves whose
    integer check is undecided are yielded.
    """
    g = nnf(f)
    yield from _dfs([], [g], integral, prune and check_leaves, prune, budget)


def _dfs(lits, todo, integral, leaf, prune, budget):
    todo = list(todo)
    while todo:
        g = todo.pop()
        if isinstance(g, Atom):
            lits.append(g)
        elif isinstance(g, And):
            todo.extend(reversed(g.args))
        elif isinstance(g, Or):
            if prune and lits and not feasible(lits, integral=False):
                return
            for arg in g.args:
                yield from _dfs(list(lits), todo + [arg], integral, leaf, prune, budget)
            return
        elif g == TRUE:
            continue
        elif g == FALSE:
            return
        else:
            raise QuantifierError(f"quantifier-free input expected, got {type(g).__name__}")
    if not leaf or feasible(lits, integral=integral, budget=budget):
        yield lits


def check_sat(f: Formula, integral: bool = True, budget: int = DEFAULT_NODE_BUDGET) -> Model | None:
    """A model of a quantifier-free formula, or None.  May raise Undecided."""
    undecided = False
    for cube in iter_cubes(f, integral=integral, budget=budget, check_leaves=False):
        try:
            m = cube_model(cube, integral=integral, budget=budget, extra_vars=f.free_vars)
        except Undecided:
            undecided = True
            continue
        if m is not None:
            return m
    if undecided:
        raise Undecided("integer case split ran out of budget")
    return None
