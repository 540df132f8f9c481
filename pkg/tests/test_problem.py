import random
from pathlib import Path

import pytest

from cyclomc.logic import Sort, Var, eq, le, rename
from cyclomc.problem import ProblemError, parse_problem, to_horn, to_native
from cyclomc.syntax import SyntaxErrorS
from oracles import hand_systems, random_box_system

PROBLEMS = Path(__file__).resolve().parent.parent / "problems"
x = Var("x")


def same_system(session, a, b):
    ren = {u: v for u, v in zip(a.state_vars, b.state_vars)}
    ren.update({u.primed(): v.primed() for u, v in zip(a.state_vars, b.state_vars)})
    return (session.equivalent(rename(a.init, ren), b.init)
            and session.equivalent(rename(a.trans, ren), b.trans)
            and session.equivalent(rename(a.assertion, ren), b.assertion))


def test_parse_native(session):
    p = parse_problem((PROBLEMS / "jump.sys").read_text(), "s")
    assert p.expect == "unsafe" and p.name == "s"
    assert p.ts.state_vars == (x,)
    assert p.ts.init == eq(x, 0) and p.ts.assertion == le(x, 2)


def test_parse_horn(session):
    p = parse_problem((PROBLEMS / "jump.smt2").read_text())
    native = parse_problem((PROBLEMS / "jump.sys").read_text())
    assert p.expect == "unsafe"
    assert same_system(session, p.ts, native.ts)


def test_real_vars_and_quantifiers(session):
    text = """(vars (r Real))
(init (exists ((k Real)) (and (= r (* 2 k)) (<= 0 k) (<= k 1))))
(trans (= r' (/ r 2)))
(assert (<= r 2))"""
    p = parse_problem(text)
    r = Var("r", Sort.REAL)
    assert p.ts.state_vars == (r,)
    assert session.equivalent(p.ts.init, le(0, r) & le(r, 2))


@pytest.mark.parametrize("text, fragment", [
    ("(vars (x Int))\n(init (= x 0))\n(trans (= x' x))", "missing section 'assert'"),
    ("(vars (x Bool))\n(init true)\n(trans true)\n(assert true)", "unsupported sort"),
    ("(vars (x Int))\n(init (= y 0))\n(trans true)\n(assert true)", "in init"),
    ("(vars (x Int))\n(init (= (* x x) 0))\n(trans true)\n(assert true)", "in init"),
    ("(vars (x Int))\n(init true)\n(trans true)\n(assert true)\n(expect maybe)", "expect"),
    ("(vars (x Int) (x Int))\n(init true)\n(trans true)\n(assert true)", "duplicate"),
    ("(widgets)", "unknown section"),
])
def test_native_errors(text, fragment):
    with pytest.raises(ProblemError, match=fragment.replace("(", r"\(")):
        parse_problem(text)


def test_syntax_error_position():
    with pytest.raises(SyntaxErrorS) as exc:
        parse_problem("(vars (x Int))\n(init (= x 0)\n")
    assert exc.value.line is not None and exc.value.col is not None
    assert str(exc.value).startswith(f"{exc.value.line}:{exc.value.col}:")
    with pytest.raises(SyntaxErrorS) as exc:
        parse_problem("(vars (x Int)))")
    assert (exc.value.line, exc.value.col) == (1, 15)


def test_horn_errors():
    two = """(set-logic HORN)
(declare-fun P (Int) Bool)
(declare-fun Q (Int) Bool)
(assert (forall ((x Int)) (=> (= x 0) (P x))))"""
    with pytest.raises(ProblemError, match="exactly one predicate"):
        parse_problem(two)
    nonlinear = """(set-logic HORN)
(declare-fun P (Int) Bool)
(assert (forall ((x Int) (y Int)) (=> (and (P x) (P y)) (P (+ x y)))))"""
    with pytest.raises(ProblemError, match="nonlinear"):
        parse_problem(nonlinear)


@pytest.mark.parametrize("ts", hand_systems(), ids=lambda t: t.name)
def test_round_trip_hand(ts, session):
    back = parse_problem(to_native(ts)).ts
    assert back.state_vars == ts.state_vars
    assert same_system(session, ts, back)
    horn = parse_problem(to_horn(ts)).ts
    assert same_system(session, ts, horn)


def test_round_trip_random(session):
    rng = random.Random(41)
    for _ in range(15):
        ts = random_box_system(rng)
        assert same_system(session, ts, parse_problem(to_native(ts)).ts)
        assert same_system(session, ts, parse_problem(to_horn(ts)).ts)
