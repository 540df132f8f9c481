import random

import pytest

from cyclomc.interpolate import (
    STRENGTHS,
    NoInterpolant,
    SeqInterpolant,
    ThetaSequence,
    binary_interpolant,
    capture,
    check_seq_interpolant,
    mc_interpolant,
    seq_interpolant,
)
from cyclomc.logic import FALSE, TRUE, Sort, Var, conj, eq, evaluate, ge, le, lt, mk_atom
from cyclomc.proof import replay_trace
from oracles import jump_system, random_real_system

x, y = Var("x", Sort.REAL), Var("y", Sort.REAL)
x0, x1, x2 = x.at(0), x.at(1), x.at(2)


def test_binary_strengths(session):
    a = conj(eq(x, 0), eq(y, x + 1))
    b = le(y, 2)
    assert binary_interpolant(session, a, b, "strongest") == eq(y, 1)
    assert binary_interpolant(session, a, b, "weakest") == b
    g = binary_interpolant(session, a, b, "generalized")
    assert g.free_vars <= {y}
    assert session.entails(a, g) and session.entails(g, b)


def test_binary_no_interpolant(session):
    with pytest.raises(NoInterpolant) as exc:
        binary_interpolant(session, le(x, 3), le(x, 2))
    m = exc.value.model
    assert evaluate(le(x, 3), m) and not evaluate(le(x, 2), m)
    with pytest.raises(ValueError):
        binary_interpolant(session, FALSE, TRUE, "medium")


def test_sequence_example(session):
    thetas = (conj(eq(x0, 0), eq(x1, x0 + 1)), eq(x2, 2 * x1), lt(x2, 0))
    for strength in STRENGTHS:
        res = seq_interpolant(session, thetas, strength)
        assert res.psis[0] == TRUE and res.psis[-1] == FALSE
        assert not check_seq_interpolant(session, thetas, res.psis)
    strongest = seq_interpolant(session, thetas, "strongest")
    assert strongest.psis[1:3] == (eq(x1, 1), eq(x2, 2))


def test_sequence_sat_gives_trace(session):
    ts = jump_system()
    v = ts.state_vars[0]
    seq = ThetaSequence.from_cuts(ts, [ts.init, TRUE, TRUE, TRUE])
    with pytest.raises(NoInterpolant) as exc:
        seq_interpolant(session, seq)
    trace = exc.value.trace
    assert len(trace) == 4 and trace[-1][v] == 3
    assert replay_trace(ts, trace)


def test_cuts_read_back():
    x = Var("x")
    res = SeqInterpolant((TRUE, eq(x.at(1), 1), le(x.at(2), 2), FALSE))
    assert res.cuts([x]) == [eq(x, 1), le(x, 2)]


def test_check_reports_violations(session):
    thetas = (conj(eq(x0, 0), eq(x1, x0 + 1)), lt(x1, 0))
    assert not check_seq_interpolant(session, thetas, (TRUE, ge(x1, 0), FALSE))
    bad = check_seq_interpolant(session, thetas, (TRUE, ge(x1, 2), FALSE))
    assert bad == ["psi_0 & theta_1 does not entail psi_1"]
    bad = check_seq_interpolant(session, thetas, (TRUE, ge(x1 + 0 * x0, 0) & ge(x0, 0), FALSE))
    assert any("mentions" in b for b in bad)
    assert check_seq_interpolant(session, thetas, (TRUE, FALSE))


def test_mc_interpolant_level(session):
    thetas = (conj(eq(x0, 0), eq(x1, x0 + 1)), conj(ge(x1, 5), eq(x2, x1)), lt(x2, 0))
    seq = ThetaSequence(thetas)
    res = mc_interpolant(session, seq)
    assert res.level == 1
    assert res.psis[:2] == (TRUE, TRUE)
    assert not check_seq_interpolant(session, thetas, res.psis)
    # maximal: the next suffix is satisfiable
    with pytest.raises(NoInterpolant):
        seq_interpolant(session, ThetaSequence(seq.suffix(2)))


def test_mc_interpolant_unsat_everywhere(session):
    thetas = (eq(x0, 0) & eq(x1, x0), le(x1, 1) & eq(x2, x1), mk_atom(">", x2, 1) & lt(x2, 0))
    res = mc_interpolant(session, ThetaSequence(thetas))
    assert res.level == 2 and res.psis == (TRUE, TRUE, TRUE, FALSE)


def test_capture_records(session):
    thetas = (conj(eq(x0, 0), eq(x1, x0 + 1)), lt(x1, 0))
    with capture() as got:
        seq_interpolant(session, thetas)
    seq_interpolant(session, thetas)
    assert len(got) == 1
    assert got[0][0].thetas == thetas


# --------------------------------------------------------------------------
# properties


def _unsat_sequences(session, count, seed):
    rng = random.Random(seed)
    out = []
    while len(out) < count:
        ts = random_real_system(rng)
        n = rng.randint(1, 4)
        seq = ThetaSequence.from_cuts(ts, [ts.init] + [TRUE] * n)
        if not session.is_sat(conj(*seq.thetas)):
            out.append(seq)
    return out


def test_strengths_are_ordered(session):
    for seq in _unsat_sequences(session, 40, 31):
        res = {s: seq_interpolant(session, seq, s) for s in STRENGTHS}
        for s in STRENGTHS:
            assert not check_seq_interpolant(session, seq.thetas, res[s].psis)
        for a, b, c in zip(res["strongest"].psis, res["generalized"].psis, res["weakest"].psis):
            assert session.entails(a, b) and session.entails(b, c)


def test_mc_level_is_maximal(session):
    for seq in _unsat_sequences(session, 40, 32):
        res = mc_interpolant(session, seq, "generalized")
        k = res.level
        assert all(p == TRUE for p in res.psis[:k + 1])
        assert not check_seq_interpolant(session, seq.thetas, res.psis)
        if k < seq.n:
            with pytest.raises(NoInterpolant):
                seq_interpolant(session, ThetaSequence(seq.suffix(k + 1), seq.state_vars))
