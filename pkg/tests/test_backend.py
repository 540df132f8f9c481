import random
import sys
import threading
from fractions import Fraction

import pytest

from cyclomc.backend import (
    BackendUnknown,
    Cancelled,
    Entailment,
    SatStatus,
    SolverSession,
    TransportError,
    external_solver_available,
)
from cyclomc.logic import (
    FALSE,
    TRUE,
    Sort,
    Var,
    conj,
    eq,
    evaluate,
    exists,
    forall,
    ge,
    implies,
    le,
    mk_atom,
    ne,
)
from oracles import random_formula

x, y = Var("x"), Var("y")
r = Var("r", Sort.REAL)
HAS_Z3 = external_solver_available("z3")


def test_sat_and_model(session):
    f = conj(ge(x, 3), le(x, 3), eq(y, x + 1))
    res = session.check_sat(f)
    assert res.sat
    assert res.model[x] == 3 and res.model[y] == 4
    assert session.check_sat(conj(ge(x, 1), le(x, 0))).unsat
    assert session.check_sat(TRUE).sat
    assert session.check_sat(FALSE).unsat


def test_integer_semantics(session):
    # no integer strictly between 0 and 1, though there is a rational one
    assert not session.is_sat(conj(mk_atom(">", x, 0), mk_atom("<", x, 1)))
    assert session.is_sat(conj(mk_atom(">", r, 0), mk_atom("<", r, 1)))
    assert not session.is_sat(eq(2 * x, 1))


def test_entailment(session):
    res = session.check_entailment(eq(x, 0), le(x, 1))
    assert res.status is Entailment.VALID
    res = session.check_entailment(le(x, 1), eq(x, 0))
    assert res.invalid
    assert evaluate(le(x, 1), res.model) and not evaluate(eq(x, 0), res.model)
    assert session.equivalent(conj(le(x, 1), ge(x, 1)), eq(x, 1))


def test_quantified_queries(session):
    assert session.is_sat(exists([y], conj(eq(x, 2 * y), ge(x, 3))))
    assert session.entails(forall([y], le(y * 0 + x, 5)), le(x, 5))
    assert not session.is_sat(forall([y], le(y, x)))


def test_undecided_is_unknown():
    s = SolverSession("internal", node_budget=0)
    # rationally feasible, integrally infeasible: needs branching to refute
    f = conj(mk_atom(">=", 3 * x - 3 * y, 1), mk_atom("<=", 3 * x - 3 * y, 2))
    res = s.check_sat(f)
    assert res.status in (SatStatus.UNKNOWN, SatStatus.UNSAT)
    if res.status is SatStatus.UNKNOWN:
        assert res.reason
        with pytest.raises(BackendUnknown):
            s.is_sat(f)


def test_cancel():
    ev = threading.Event()
    s = SolverSession("internal", cancel=ev)
    assert s.is_sat(eq(x, 1))
    ev.set()
    with pytest.raises(Cancelled):
        s.is_sat(eq(x, 1))


def test_stats_counted(session):
    session.is_sat(eq(x, 1))
    session.is_sat(conj(eq(x, 1), eq(x, 2)))
    assert session.stats.queries == 2
    assert session.stats.sat == 1 and session.stats.unsat == 1


def test_env_var_and_override(monkeypatch):
    monkeypatch.setenv("CYCLOMC_SOLVER", "/nonexistent/solver")
    assert SolverSession().name == "/nonexistent/solver"
    assert SolverSession("internal").name == "internal"
    monkeypatch.setenv("CYCLOMC_SOLVER", "internal")
    assert SolverSession().name == "internal"
    monkeypatch.delenv("CYCLOMC_SOLVER")
    assert SolverSession().name == "internal"


def test_missing_solver_is_transport_error():
    s = SolverSession("/nonexistent/solver")
    with pytest.raises(TransportError):
        s.check_sat(eq(x, 1))


def test_garbled_solver_is_transport_error(tmp_path):
    fake = tmp_path / "fake_solver"
    fake.write_text(f"#!{sys.executable}\nimport sys\nfor line in sys.stdin:\n"
                    "    if 'check-sat' in line:\n        print('banana', flush=True)\n")
    fake.chmod(0o755)
    with SolverSession(str(fake)) as s:
        with pytest.raises(TransportError):
            s.check_sat(eq(x, 1))


@pytest.mark.skipif(not HAS_Z3, reason="z3 not installed")
def test_external_solver_examples():
    with SolverSession("z3") as s:
        res = s.check_sat(conj(ge(x, 3), le(x, 3), eq(y, x + 1)))
        assert res.sat and res.model[y] == 4
        assert not s.is_sat(conj(mk_atom(">", x, 0), mk_atom("<", x, 1)))
        assert s.is_sat(conj(mk_atom(">", r, 0), mk_atom("<", r, Fraction(1, 3))))
        assert s.entails(eq(x, 0), ne(x, 1))


@pytest.mark.skipif(not HAS_Z3, reason="z3 not installed")
def test_internal_agrees_with_z3():
    rng = random.Random(21)
    with SolverSession("internal") as a, SolverSession("z3") as b:
        for _ in range(300):
            f = random_formula(rng, (x, y), depth=3)
            ra, rb = a.check_sat(f), b.check_sat(f)
            assert ra.status is rb.status, f
            for res in (ra, rb):
                if res.sat:
                    assert evaluate(f, res.model)


def test_models_are_sound(session):
    rng = random.Random(22)
    for _ in range(300):
        f = random_formula(rng, (x, y), depth=3)
        res = session.check_sat(f)
        if res.sat:
            assert evaluate(f, res.model)
        # entailment is reflexive and models refute failed entailments
        g = random_formula(rng, (x, y), depth=1)
        e = session.check_entailment(f, g)
        if e.invalid:
            assert evaluate(f, e.model) and not evaluate(g, e.model)
        assert session.entails(f, implies(g, g))
