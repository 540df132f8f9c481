import random
from fractions import Fraction

import pytest

from cyclomc.logic import (
    FALSE,
    TRUE,
    Atom,
    Exists,
    LinExpr,
    Model,
    NonlinearError,
    Or,
    QuantifierError,
    Sort,
    SortError,
    TransitionSystem,
    UnboundVariableError,
    Var,
    conj,
    disj,
    eq,
    evaluate,
    exists,
    free_vars,
    implies,
    mk_atom,
    neg,
    nnf,
    substitute,
)
from oracles import random_formula, random_model

x, y, z = Var("x"), Var("y"), Var("z")


def test_evaluate_examples():
    assert evaluate(mk_atom("<=", x, 2), {x: 3}) is False
    tau = disj(eq(y, x + 1), eq(y, 1 - 2 * x))
    assert evaluate(tau, {x: 0, y: 1})
    assert not evaluate(FALSE, {})
    assert evaluate(TRUE, {})


def test_evaluate_errors():
    with pytest.raises(UnboundVariableError):
        evaluate(mk_atom("<=", x, 2), {})
    with pytest.raises(QuantifierError):
        evaluate(exists([x], eq(x, y)), {y: 0})


def test_free_vars():
    assert free_vars(exists([x], eq(x, y))) == {y}
    assert free_vars(TRUE) == frozenset()
    assert free_vars(conj(eq(x, 0), eq(y, x + 1))) == {x, y}


def test_nnf_examples():
    a, b = mk_atom("<=", x, 0), mk_atom("<=", y, 0)
    assert nnf(neg(conj(a, b))) == disj(mk_atom(">", x, 0), mk_atom(">", y, 0))
    assert nnf(neg(mk_atom("<=", x, 2))) == mk_atom(">", x, 2)
    assert nnf(implies(a, b)) == disj(mk_atom(">", x, 0), b)


def test_atom_normal_form():
    a = mk_atom("<=", 2 * x + 4 * y, 6)
    assert isinstance(a, Atom)
    assert dict(a.coeffs) == {x: 1, y: 2} and a.bound == 3
    # integer tightening of a strict bound
    assert mk_atom("<", x, 3) == mk_atom("<=", x, 2)
    assert mk_atom(">=", x, 3) == neg(mk_atom("<", x, 3))
    # constant atoms fold
    assert mk_atom("<=", LinExpr((), 1), 2) == TRUE
    assert mk_atom("=", x - x, 1) == FALSE


def test_real_atoms_keep_strictness():
    r = Var("r", Sort.REAL)
    a = mk_atom("<", r, 3)
    assert a.op == "<" and evaluate(a, {r: Fraction(5, 2)})


def test_nonlinear_and_sort_errors():
    with pytest.raises(NonlinearError):
        LinExpr.of(x) * y
    with pytest.raises(SortError):
        Model({x: Fraction(1, 2)})


def test_substitute_examples():
    f = conj(mk_atom("<=", x, 2), eq(y, x + 1))
    g = substitute(f, {x: z + 1})
    assert x not in g.free_vars
    assert evaluate(g, {z: 0, y: 2})


def test_model_helpers():
    m = Model({x.at(0): 1, x.at(1): 2, y.at(1): 3})
    assert m.at_step([x, y], 1) == Model({x: 2, y: 3})
    assert m.restrict([x.at(0)]) == Model({x.at(0): 1})
    r = Var("r", Sort.REAL)
    assert str(Model({r: Fraction(1, 2)})) == "{r=1/2}"


def test_transition_system_validates():
    ts = TransitionSystem((x,), eq(x, 0), eq(x.primed(), x + 1), mk_atom(">=", x, 0))
    assert ts.primed_vars == (x.primed(),)
    assert ts.at(eq(x, 0), 3) == eq(x.at(3), 0)
    assert isinstance(ts.image_formula(eq(x, 0)), Exists)
    with pytest.raises(Exception):
        TransitionSystem((x,), eq(y, 0), eq(x.primed(), x), TRUE)


def test_operators():
    a, b = mk_atom("<=", x, 0), mk_atom(">=", y, 1)
    assert (a & b) == conj(a, b)
    assert isinstance(a | b, Or)
    assert ~a == mk_atom(">", x, 0)
    assert conj(a, TRUE) == a and disj(a, FALSE) == a
    assert conj(a, FALSE) == FALSE and disj(a, TRUE) == TRUE


# --------------------------------------------------------------------------
# properties


def test_nnf_preserves_models():
    rng = random.Random(7)
    vs = (x, y, z)
    for _ in range(1000):
        f = random_formula(rng, vs, depth=3)
        if rng.random() < 0.3:
            f = implies(f, random_formula(rng, vs, depth=1))
        m = random_model(rng, vs, halves=False)
        assert evaluate(f, m) == evaluate(nnf(f), m)


def test_substitute_is_compositional():
    rng = random.Random(8)
    vs = (x, y, z)
    for _ in range(300):
        f = random_formula(rng, vs, depth=2)
        sigma = {x: rng.randint(-2, 2) * y + rng.randint(-3, 3), z: y - rng.randint(0, 2)}
        m = random_model(rng, vs, halves=False)
        shifted = dict(m)
        for v, t in sigma.items():
            shifted[v] = LinExpr.of(t).evaluate(m)
        assert evaluate(substitute(f, sigma), m) == evaluate(f, shifted)


def test_substitution_removes_variable():
    rng = random.Random(9)
    for _ in range(200):
        f = random_formula(rng, (x, y), depth=2)
        g = substitute(f, {x: 2 * y + rng.randint(-2, 2)})
        assert x not in g.free_vars
