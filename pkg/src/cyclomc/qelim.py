"""Quantifier elimination, simplification and model-based projection.

Elimination is exact over the rationals: formulas are expanded into their
satisfiable cubes, equalities are used for substitution, disequalities on
eliminated variables are split, and the remaining bounds go through
Fourier-Motzkin.  For Int-sorted variables the result is the rational
relaxation (it may be weaker than the integer projection, never stronger).
"""

from __future__ import annotations

import enum
from collections.abc import Iterable, Mapping
from fractions import Fraction

from cyclomc import fm, lra
from cyclomc.logic import (
    FALSE,
    TRUE,
    And,
    Atom,
    Exists,
    Forall,
    Formula,
    Implies,
    LinExpr,
    Not,
    Or,
    Var,
    conj,
    disj,
    evaluate,
    is_quantifier_free,
    mk_atom,
    neg,
    negate_atom,
    nnf,
    substitute_unchecked,
)


class MbpPreconditionError(ValueError):
    """The model handed to MBP does not satisfy the formula."""


# --------------------------------------------------------------------------
# cube projection


def _solve_for(a: Atom, v: Var) -> LinExpr:
    """Term t with ``a`` equivalent to ``v = t`` (``a`` is an equality)."""
    c = dict(a.coeffs)[v]
    rest = LinExpr((w, d) for w, d in a.coeffs if w != v)
    return (LinExpr((), a.bound) - rest) / c


def _subst_lits(lits: list[Formula], v: Var, t: LinExpr):
    out = []
    for a in lits:
        b = substitute_unchecked(a, {v: t}) if v in a.free_vars else a
        if b == FALSE:
            return None
        if b != TRUE:
            out.append(b)
    return out


def project_cube(lits: Iterable[Atom], elim: Iterable[Var]) -> list[list[Atom]]:
    """Cubes whose disjunction is equivalent (over Q) to ``exists elim. /\\ lits``."""
    lits = list(lits)
    elim = [v for v in sorted(set(elim), key=lambda v: v.key)]
    # equalities first
    while True:
        best = None
        for a in lits:
            if a.op != "=":
                continue
            for v, c in a.coeffs:
                if v in elim:
                    k = (abs(c) != 1, abs(c), v.key)
                    if best is None or k < best[0]:
                        best = (k, a, v)
        if best is None:
            break
        _, a, v = best
        t = _solve_for(a, v)
        lits = _subst_lits([b for b in lits if b is not a], v, t)
        if lits is None:
            return []
        elim.remove(v)
    elim_set = set(elim)
    for a in lits:
        if a.op == "!=" and not elim_set.isdisjoint(a.free_vars):
            rest = [b for b in lits if b is not a]
            out = []
            for branch in (mk_atom("<", a.lhs, a.bound), mk_atom(">", a.lhs, a.bound)):
                if branch != FALSE:
                    out.extend(project_cube(rest + ([] if branch == TRUE else [branch]), elim))
            return out
    keep = [a for a in lits if elim_set.isdisjoint(a.free_vars)]
    work = [a for a in lits if not elim_set.isdisjoint(a.free_vars)]
    if not work:
        return [keep]
    vs = sorted({v for a in work for v in a.free_vars}, key=lambda v: v.key)
    cols = {v: i for i, v in enumerate(vs)}
    rows = []
    for a in work:
        coeffs = [0] * len(vs)
        for v, c in a.coeffs:
            coeffs[cols[v]] = c
        rows.append((tuple(coeffs), a.bound, a.op == "<"))
    rows = fm.dedupe(rows)
    todo = {cols[v] for v in elim if v in cols}
    while rows is not None and todo:
        col = min(sorted(todo), key=lambda i: fm.count_pairs(rows, i))
        todo.discard(col)
        rows = fm.eliminate(rows, col)
    if rows is None:
        return []
    out = list(keep)
    for coeffs, bound, strict in rows:
        e = LinExpr((vs[i], c) for i, c in enumerate(coeffs) if c)
        a = mk_atom("<" if strict else "<=", e, bound)
        if a == FALSE:
            return []
        if a != TRUE:
            out.append(a)
    return [out]


# --------------------------------------------------------------------------
# cube-level simplification


def _cube_entails_lit(cube: list[Atom], lit: Atom) -> bool:
    neg_lit = negate_atom(lit)
    if neg_lit == FALSE:
        return True
    if neg_lit == TRUE:
        return not lra.feasible(cube, integral=False)
    return not lra.feasible(cube + [neg_lit], integral=False)


def _lit_order(a: Atom):
    return (str(a),)


def simplify_cube(cube: Iterable[Atom]) -> list[Atom] | None:
    """Drop duplicate and implied literals; None if the cube is infeasible."""
    lits = []
    for a in cube:
        if a == FALSE:
            return None
        if a != TRUE and a not in lits:
            lits.append(a)
    if not lra.feasible(lits, integral=False):
        return None
    lits.sort(key=_lit_order)
    i = 0
    while i < len(lits):
        rest = lits[:i] + lits[i + 1:]
        if rest and _cube_entails_lit(rest, lits[i]):
            lits = rest
        else:
            i += 1
    return lits


def cube_entails(a: list[Atom], b: list[Atom]) -> bool:
    return all(_cube_entails_lit(a, lit) for lit in b)


def _witness(cube: list[Atom]) -> dict:
    return lra.cube_model(cube, integral=False) or {}


def _refuted(w: dict, cube: list[Atom]) -> bool:
    """Does the point ``w`` (a model of some other cube) falsify a literal of ``cube``?"""
    for a in cube:
        val = sum((Fraction(c) * w.get(v, 0) for v, c in a.coeffs), Fraction(0))
        if not a.holds(val):
            return True
    return False


def simplify_cubes(cubes: Iterable[Iterable[Atom]]) -> list[list[Atom]]:
    seen = []
    for c in cubes:
        s = simplify_cube(c)
        if s is None:
            continue
        if not s:
            return [[]]
        if s not in seen:
            seen.append(s)
    # one model per cube refutes most candidate entailments without a solver call
    wit = [_witness(c) for c in seen]

    def entails(i, j):
        return not _refuted(wit[i], seen[j]) and cube_entails(seen[i], seen[j])

    kept: list[list[Atom]] = []
    for i, c in enumerate(seen):
        subsumed = False
        for j in range(len(seen)):
            if i != j and entails(i, j) and (j < i or not entails(j, i)):
                subsumed = True
                break
        if not subsumed:
            kept.append(c)
    return kept


def cubes_to_formula(cubes: Iterable[Iterable[Atom]]) -> Formula:
    return disj(*(conj(*c) for c in cubes))


def dnf_cubes(f: Formula, integral: bool = False) -> list[list[Atom]]:
    f = eliminate_quantifiers(f)
    return [list(c) for c in lra.iter_cubes(f, integral=integral)]


def simplify(f: Formula) -> Formula:
    """An equivalent (over Q) DNF formula with redundant parts removed."""
    if f == TRUE or f == FALSE:
        return f
    return cubes_to_formula(simplify_cubes(dnf_cubes(f)))


# --------------------------------------------------------------------------
# quantifier elimination


def eliminate_quantifiers(f: Formula) -> Formula:
    """Quantifier-free formula equivalent over Q to ``f``."""
    if is_quantifier_free(f):
        return f
    if isinstance(f, Exists):
        return qe_exists(f.vars, eliminate_quantifiers(f.body))
    if isinstance(f, Forall):
        return qe_forall(f.vars, eliminate_quantifiers(f.body))
    if isinstance(f, Not):
        return neg(eliminate_quantifiers(f.arg))
    if isinstance(f, And):
        return conj(*(eliminate_quantifiers(a) for a in f.args))
    if isinstance(f, Or):
        return disj(*(eliminate_quantifiers(a) for a in f.args))
    if isinstance(f, Implies):
        return Implies(eliminate_quantifiers(f.lhs), eliminate_quantifiers(f.rhs))
    raise TypeError(f"not a formula: {f!r}")


def qe_exists(vs: Iterable[Var], f: Formula) -> Formula:
    """Quantifier-free equivalent of ``exists vs. f`` (exact over Q)."""
    vs = set(vs)
    if not is_quantifier_free(f):
        f = eliminate_quantifiers(f)
    vs &= f.free_vars
    if not vs:
        return f
    projected = []
    for cube in lra.iter_cubes(f, integral=True):
        projected.extend(project_cube(cube, vs))
    return cubes_to_formula(simplify_cubes(projected))


def qe_forall(vs: Iterable[Var], f: Formula) -> Formula:
    """Quantifier-free equivalent of ``forall vs. f`` (exact over Q)."""
    vs = set(vs)
    if not is_quantifier_free(f):
        f = eliminate_quantifiers(f)
    vs &= f.free_vars
    if not vs:
        return f
    return nnf(neg(qe_exists(vs, nnf(neg(f)))))


def post_image(ts, f: Formula) -> Formula:
    """Quantifier-free strongest postcondition of ``f`` under ``ts.trans``."""
    g = ts.image_formula(f)
    return qe_exists(g.vars, g.body) if isinstance(g, Exists) else g


def pre_image(ts, f: Formula) -> Formula:
    """Quantifier-free ``exists x'. trans(x, x') & f(x')``."""
    return qe_exists(ts.primed_vars, conj(ts.trans, ts.prime(f)))


def weakest_pre(ts, f: Formula) -> Formula:
    """Quantifier-free ``forall x'. trans(x, x') -> f(x')``."""
    return qe_forall(ts.primed_vars, Implies(ts.trans, ts.prime(f)))


# --------------------------------------------------------------------------
# model-based projection


class MbpFlavor(enum.Enum):
    LW = "lw"
    SUBSTITUTION = "substitution"
    ADVERSARIAL = "adversarial"


def implicant(f: Formula, m: Mapping[Var, Fraction]) -> list[Atom]:
    """Literals of ``nnf(f)`` true under ``m`` that together entail ``f``.

    For a disjunction the first disjunct that holds is taken.
    """
    return _implicant(nnf(f), m)


def _implicant(g: Formula, m) -> list[Atom]:
    if isinstance(g, Atom):
        return [g]
    if g == TRUE:
        return []
    if isinstance(g, And):
        out = []
        for a in g.args:
            out.extend(_implicant(a, m))
        return out
    if isinstance(g, Or):
        for a in g.args:
            if evaluate(a, m):
                return _implicant(a, m)
    raise MbpPreconditionError("model does not satisfy the formula")


def _bound_of(a: Atom, v: Var, m):
    """Classify a literal on v: ('eq', t) / ('lo', t, strict) / ('hi', t, strict)."""
    c = Fraction(dict(a.coeffs)[v])
    rest = LinExpr((w, d) for w, d in a.coeffs if w != v)
    t = (LinExpr((), a.bound) - rest) / c
    if a.op == "=":
        return ("eq", t)
    if a.op == "!=":
        # keep the side the model is on
        return ("lo", t, True) if m[v] > t.evaluate(m) else ("hi", t, True)
    strict = a.op == "<"
    return ("hi", t, strict) if c > 0 else ("lo", t, strict)


def _lw_project(lits: list[Formula], v: Var, m) -> list[Formula]:
    mine = [a for a in lits if v in a.free_vars]
    others = [a for a in lits if v not in a.free_vars]
    if not mine:
        return lits
    for a in mine:
        if a.op == "=":
            t = _solve_for(a, v)
            res = _subst_lits([b for b in lits if b is not a], v, t)
            assert res is not None, "model-consistent substitution cannot be false"
            return res
    lows, highs = [], []
    for a in mine:
        kind, t, strict = _bound_of(a, v, m)
        (lows if kind == "lo" else highs).append((t, strict))
    if not lows:
        return others
    best_i = 0
    best_val = lows[0][0].evaluate(m)
    for i, (t, s) in enumerate(lows[1:], 1):
        val = t.evaluate(m)
        if val > best_val or (val == best_val and s and not lows[best_i][1]):
            best_i, best_val = i, val
    t_star, s_star = lows[best_i]
    out = list(others)
    for i, (t, s) in enumerate(lows):
        if i != best_i:
            out.append(mk_atom("<" if (s and not s_star) else "<=", t, t_star))
    for u, s in highs:
        out.append(mk_atom("<" if (s or s_star) else "<=", t_star, u))
    return [a for a in out if a != TRUE]


def mbp_lw(f: Formula, vs: Iterable[Var], m: Mapping[Var, Fraction]) -> Formula:
    """Loos-Weispfenning style projection of the implicant of ``f`` picked by ``m``."""
    f = eliminate_quantifiers(f)
    lits: list[Formula] = implicant(f, m)
    for v in sorted(set(vs), key=lambda v: v.key):
        lits = _lw_project(lits, v, m)
    lits = sorted(set(lits), key=_lit_order)
    return conj(*lits)


def adversarial_target(f: Formula, vs: Iterable[Var], search_limit: int = 64):
    """For ``f`` with exactly one free variable x outside ``vs``, the largest
    negative integer n with ``exists vs. f[x := n]`` (searched down to
    ``-search_limit``); None if there is no such n or the shape does not fit."""
    vs = set(vs)
    rest = f.free_vars - vs
    if len(rest) != 1:
        return None
    (x,) = rest
    g = qe_exists(vs, f)
    for n in range(-1, -search_limit - 1, -1):
        if evaluate(g, {x: Fraction(n)}):
            return x, n
    return None


def mbp(flavor: MbpFlavor, f: Formula, vs: Iterable[Var], m: Mapping[Var, Fraction],
        search_limit: int = 64) -> Formula:
    """Model-based projection of ``vs`` out of ``f`` around model ``m``.

    LW has a finite image for each fixed formula; SUBSTITUTION plugs in the
    model values (infinite image); ADVERSARIAL answers ``x = m(x)`` whenever
    m(x) is the largest negative value consistent with ``exists vs. f`` and
    defers to LW otherwise.
    """
    vs = set(vs)
    g = eliminate_quantifiers(f)
    missing = [v for v in g.free_vars if v not in m]
    if missing:
        raise MbpPreconditionError(f"model lacks values for {sorted(map(str, missing))}")
    if not evaluate(g, m):
        raise MbpPreconditionError("model does not satisfy the formula")
    if flavor is MbpFlavor.SUBSTITUTION:
        return substitute_unchecked(g, {v: LinExpr((), m[v]) for v in vs if v in g.free_vars})
    if flavor is MbpFlavor.ADVERSARIAL:
        hit = adversarial_target(g, vs, search_limit)
        if hit is not None:
            x, n = hit
            if m[x] == n:
                return mk_atom("=", x, n)
    return mbp_lw(g, vs, m)
