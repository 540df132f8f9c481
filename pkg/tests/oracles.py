"""Independent oracles and random generators shared by the tests.

The oracles (explicit-state search, the one-variable existential test)
never go through the package's solver, quantifier elimination or
interpolation code; they only use ``evaluate`` (plain rational arithmetic on
ground formulas) and brute force.  The random generators may use the
solver, since they only need to produce well-formed inputs.
"""

from __future__ import annotations

import itertools
import random
from fractions import Fraction

from cyclomc.logic import (
    FALSE,
    Sort,
    TransitionSystem,
    Var,
    atoms,
    conj,
    disj,
    evaluate,
    mk_atom,
    neg,
)
from cyclomc.qelim import post_image, simplify

OPS = ("<=", "<", "=", ">=", ">", "!=")


# --------------------------------------------------------------------------
# reference systems


def jump_system() -> TransitionSystem:
    x = Var("x")
    return TransitionSystem((x,), mk_atom("=", x, 0),
                            disj(mk_atom("=", x.primed(), x + 1), mk_atom("=", x.primed(), 1 - 2 * x)),
                            mk_atom("<=", x, 2), name="S")


def counter_system() -> TransitionSystem:
    x = Var("x")
    return TransitionSystem((x,), mk_atom("=", x, 0), mk_atom("=", x.primed(), x + 1),
                            mk_atom(">=", x, 0), name="counter")


def stutter_system() -> TransitionSystem:
    x = Var("x")
    return TransitionSystem((x,), mk_atom("=", x, 0), mk_atom("=", x.primed(), x),
                            mk_atom("<=", x, 0), name="stutter")


def empty_init_system() -> TransitionSystem:
    x = Var("x")
    return TransitionSystem((x,), FALSE, mk_atom("=", x.primed(), x + 1), mk_atom("<=", x, 0), name="empty")


def two_counter_system() -> TransitionSystem:
    x, y = Var("x"), Var("y")
    xp, yp = x.primed(), y.primed()
    trans = disj(conj(mk_atom("=", xp, x + 1), mk_atom("=", yp, y)),
                 conj(mk_atom("=", xp, x), mk_atom("=", yp, y + 1), mk_atom("<", y, x)))
    return TransitionSystem((x, y), conj(mk_atom("=", x, 0), mk_atom("=", y, 0)), trans,
                            mk_atom(">=", x - y, 0), name="two-counters")


def hand_systems() -> list[TransitionSystem]:
    """Small systems with known verdicts (see ``HAND_VERDICTS``)."""
    x, y = Var("x"), Var("y")
    xp, yp = x.primed(), y.primed()
    bounded = TransitionSystem(
        (x,), mk_atom("=", x, 0),
        disj(conj(mk_atom("<", x, 5), mk_atom("=", xp, x + 1)), conj(mk_atom(">=", x, 5), mk_atom("=", xp, 0))),
        mk_atom("<=", x, 5), name="mod6")
    swap = TransitionSystem(
        (x, y), conj(mk_atom("=", x, 1), mk_atom("=", y, 2)),
        conj(mk_atom("=", xp, y), mk_atom("=", yp, x)),
        conj(mk_atom(">=", x, 1), mk_atom("<=", y, 2)), name="swap")
    down = TransitionSystem(
        (x,), mk_atom("=", x, 4), conj(mk_atom(">", x, 0), mk_atom("=", xp, x - 1)),
        mk_atom(">=", x, 1), name="down")
    return [jump_system(), counter_system(), stutter_system(), empty_init_system(),
            two_counter_system(), bounded, swap, down]


HAND_VERDICTS = {"S": "UNSAFE", "counter": "SAFE", "stutter": "SAFE", "empty": "SAFE",
                 "two-counters": "SAFE", "mod6": "SAFE", "swap": "SAFE", "down": "UNSAFE"}


# --------------------------------------------------------------------------
# box-bounded random systems and explicit-state search


def _box(vs, lo, hi):
    return conj(*(mk_atom(">=", v, lo) for v in vs), *(mk_atom("<=", v, hi) for v in vs))


def random_box_system(rng: random.Random, dims: int | None = None, bound: int = 3) -> TransitionSystem:
    """An Int system whose transitions stay in ``[-bound, bound]^d``.

    Each branch is an optional guard plus, per variable, either an affine
    update with coefficients in {-1, 0, 1} or a bounded nondeterministic
    step; the primed box is part of every branch.
    """
    d = dims or rng.choice((1, 2))
    vs = tuple(Var(n, Sort.INT) for n in "xy"[:d])
    ps = tuple(v.primed() for v in vs)
    branches = []
    for _ in range(rng.randint(1, 3)):
        parts = []
        if rng.random() < 0.5:
            parts.append(random_atom(rng, vs, coeff=2, const=bound, ops=("<=", ">=", "<", ">")))
        for p in ps:
            if rng.random() < 0.8:
                e = sum((rng.choice((-1, 0, 1, 1)) * v for v in vs), start=rng.randint(-2, 2))
                parts.append(mk_atom("=", p, e))
            else:
                v = vs[ps.index(p)]
                lo = rng.randint(-2, 1)
                parts.append(conj(mk_atom(">=", p, v + lo), mk_atom("<=", p, v + lo + rng.randint(0, 2))))
        parts.append(_box(ps, -bound, bound))
        branches.append(conj(*parts))
    init_pt = [rng.randint(-1, 1) for _ in vs]
    if rng.random() < 0.3:
        init = conj(*(mk_atom(">=", v, c - 1) for v, c in zip(vs, init_pt)),
                    *(mk_atom("<=", v, c) for v, c in zip(vs, init_pt)))
    else:
        init = conj(*(mk_atom("=", v, c) for v, c in zip(vs, init_pt)))
    # mostly assertions that hold initially, so that longer traces show up
    pt = dict(zip(vs, map(Fraction, init_pt)))
    for _ in range(10):
        assertion = random_atom(rng, vs, coeff=2, const=bound + 1, ops=("<=", ">=", "<", ">"))
        if evaluate(assertion, pt) or rng.random() < 0.15:
            break
    if rng.random() < 0.3:
        assertion = disj(assertion, random_atom(rng, vs, coeff=2, const=bound, ops=("<=", ">=")))
    return TransitionSystem(vs, init, disj(*branches), assertion, name="box")


def box_states(ts: TransitionSystem, bound: int):
    rng_ = range(-bound, bound + 1)
    for pt in itertools.product(rng_, repeat=len(ts.state_vars)):
        yield dict(zip(ts.state_vars, map(Fraction, pt)))


def successors(ts: TransitionSystem, s: dict, bound: int) -> list[dict]:
    out = []
    for t in box_states(ts, bound):
        m = dict(s)
        m.update({v.primed(): t[v] for v in ts.state_vars})
        if evaluate(ts.trans, m):
            out.append(t)
    return out


def explicit_distance(ts: TransitionSystem, bound: int, k: int) -> int | None:
    """Length of the shortest path from init to a bad state, if it is at most k."""
    def key(s):
        return tuple(s[v] for v in ts.state_vars)

    layer = [s for s in box_states(ts, bound) if evaluate(ts.init, s)]
    seen = {key(s) for s in layer}
    for depth in range(k + 1):
        if any(not evaluate(ts.assertion, s) for s in layer):
            return depth
        nxt = []
        for s in layer:
            for t in successors(ts, s, bound):
                if key(t) not in seen:
                    seen.add(key(t))
                    nxt.append(t)
        layer = nxt
    return None


def reachable(ts: TransitionSystem, bound: int) -> list[dict]:
    layer = [s for s in box_states(ts, bound) if evaluate(ts.init, s)]
    seen = {tuple(s.values()): s for s in layer}
    while layer:
        nxt = []
        for s in layer:
            for t in successors(ts, s, bound):
                if tuple(t.values()) not in seen:
                    seen[tuple(t.values())] = t
                    nxt.append(t)
        layer = nxt
    return list(seen.values())


# --------------------------------------------------------------------------
# random formulas


def random_atom(rng: random.Random, vs, coeff: int = 3, const: int = 4, ops=OPS):
    while True:
        cs = [rng.randint(-coeff, coeff) for _ in vs]
        if any(cs):
            break
    e = sum((c * v for c, v in zip(cs, vs)), start=0)
    return mk_atom(rng.choice(ops), e, rng.randint(-const, const))


def random_formula(rng: random.Random, vs, depth: int = 2, coeff: int = 3, const: int = 4, ops=OPS):
    if depth == 0 or rng.random() < 0.3:
        return random_atom(rng, vs, coeff, const, ops)
    kind = rng.choice(("and", "or", "not", "and", "or"))
    if kind == "not":
        return neg(random_formula(rng, vs, depth - 1, coeff, const, ops))
    args = [random_formula(rng, vs, depth - 1, coeff, const, ops) for _ in range(rng.randint(2, 3))]
    return conj(*args) if kind == "and" else disj(*args)


def random_model(rng: random.Random, vs, span: int = 4, halves: bool = True) -> dict:
    den = 2 if halves else 1
    return {v: Fraction(rng.randint(-span * den, span * den), den) for v in vs}


# --------------------------------------------------------------------------
# one-variable existential oracle


def exists_one(f, y: Var, m: dict) -> bool:
    """Is there a rational value of ``y`` making ``f`` true under ``m``?

    With every other variable fixed each atom compares y with a constant,
    so the truth value of f is constant on the open intervals between those
    constants; testing the constants, the midpoints and one point beyond
    each end is exhaustive.
    """
    cuts = set()
    for a in atoms(f):
        cs = dict(a.coeffs)
        c = cs.get(y, 0)
        if c == 0:
            continue
        rest = sum(Fraction(d) * m[v] for v, d in a.coeffs if v != y)
        cuts.add((Fraction(a.bound) - rest) / c)
    pts = sorted(cuts)
    cands = list(pts)
    cands += [(a + b) / 2 for a, b in zip(pts, pts[1:])]
    cands += [pts[0] - 1, pts[-1] + 1] if pts else [Fraction(0)]
    for c in cands:
        mm = dict(m)
        mm[y] = c
        if evaluate(f, mm):
            return True
    return False


# --------------------------------------------------------------------------
# random cut sequences


def random_real_system(rng: random.Random) -> TransitionSystem:
    d = rng.choice((1, 1, 2))
    vs = tuple(Var(n, Sort.REAL) for n in "xy"[:d])
    ps = tuple(v.primed() for v in vs)
    branches = []
    for _ in range(rng.randint(1, 2)):
        parts = []
        for p in ps:
            cs = [rng.choice((-1, 0, 1, 1, rng.randint(-4, 4))) for _ in vs]
            e = sum((c * v for c, v in zip(cs, vs)), start=rng.randint(-2, 2))
            parts.append(mk_atom("=", p, e))
        if rng.random() < 0.3:
            parts.append(random_atom(rng, vs, coeff=4, const=4, ops=("<=", ">=")))
        branches.append(conj(*parts))
    init = conj(*(mk_atom("=", v, rng.randint(-2, 2)) for v in vs))
    assertion = random_atom(rng, vs, coeff=4, const=8, ops=("<=", ">=", "<", ">"))
    return TransitionSystem(vs, init, disj(*branches), assertion, name="real")


def random_cut_sequence(rng: random.Random, session, max_n: int = 5, tries: int = 500):
    """A random system with a cut sequence that meets the input condition
    but whose last element breaks the assertion.

    Cuts are either the exact image of their predecessor or a weakening of
    it: a random subset of pool atoms that the image entails (the assertion
    is kept in every cut but the last).
    """
    for _ in range(tries):
        ts = random_real_system(rng)
        if not session.entails(ts.init, ts.assertion):
            continue
        vs = ts.state_vars
        alpha = list(atoms(ts.assertion))
        pool = [random_atom(rng, vs, coeff=4, const=6, ops=("<=", ">=", "<", ">")) for _ in range(4)]
        n = rng.randint(1, max_n)
        phis = [ts.init]
        for i in range(1, n + 1):
            img = ts.image_formula(phis[-1])
            last = i == n
            if not last and rng.random() < 0.4:
                cut = simplify(post_image(ts, phis[-1]))
            else:
                kept = [a for a in pool if rng.random() < 0.6 and session.entails(img, a)]
                if not last:
                    kept += alpha
                cut = conj(*kept)
            if not session.entails(img, cut):
                break
            if last != (not session.entails(cut, ts.assertion)):
                break
            phis.append(cut)
        else:
            return ts, phis
    raise RuntimeError("no invalid cut sequence found")
