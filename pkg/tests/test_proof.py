import pytest

from cyclomc.logic import TRUE, Model, Var, eq, ge, le, mk_atom
from cyclomc.proof import (
    CutSequence,
    PartialProof,
    ProofError,
    Rule,
    Status,
    Verdict,
    apply_axiom,
    apply_cut,
    apply_se,
    apply_se_cut,
    bounded_unroll_formula,
    check_global_trace,
    close_by_disjunction,
    conservativity_level,
    cut_sequence_violations,
    export_dot,
    extract_certificate,
    invariant_violations,
    link,
    refinement_violations,
    replay_trace,
    try_link,
)
from oracles import counter_system, empty_init_system, jump_system

x = Var("x")


def counter_proof(session):
    """counter: x=0 -> (cut x>=0) -> x>=0 -> (cut x>=0) -> x>=0, linked back."""
    ts = counter_system()
    p = PartialProof(ts)
    a = apply_se_cut(p, p.root, ge(x, 0), session)
    b = apply_se_cut(p, a, ge(x, 0), session)
    assert try_link(p, b, session) == a
    return p, a, b


def test_apply_se_computes_image(session):
    ts = jump_system()
    p = PartialProof(ts)
    c = apply_se(p, p.root, session)
    assert p[c].lhs == eq(x, 1)
    assert p[p.root].rule is Rule.SE
    assert p[p.root].side[0].status is Status.VALID
    c2 = apply_se(p, c, session)
    assert session.equivalent(p[c2].lhs, eq(x, 2) | eq(x, -1))
    assert p.open_leaves() == [c2] and p[c2].depth == 2


def test_valid_cyclic_proof(session):
    p, a, b = counter_proof(session)
    assert p.is_closed() and p.is_valid()
    assert check_global_trace(p) == []
    cert = extract_certificate(p, session)
    assert cert.verdict is Verdict.SAFE
    assert not invariant_violations(p.ts, cert.invariant, session)
    assert session.equivalent(cert.invariant, ge(x, 0))


def test_link_without_progress_is_rejected(session):
    ts = counter_system()
    p = PartialProof(ts)
    c = apply_cut(p, p.root, ts.init, session)
    link(p, c, p.root)
    assert p.is_closed()
    assert check_global_trace(p) == [c]
    with pytest.raises(ProofError, match="global trace"):
        extract_certificate(p, session)


def test_try_link_needs_progressing_ancestor(session):
    ts = counter_system()
    p = PartialProof(ts)
    c = apply_cut(p, p.root, ge(x, 0), session)
    assert try_link(p, c, session) is None
    assert p[c].rule is Rule.OPEN


def test_invalid_side_condition(session):
    ts = jump_system()
    p = PartialProof(ts)
    c = apply_se_cut(p, p.root, eq(x, 5), session)
    assert p[p.root].side[0].status is Status.INVALID
    assert p[p.root].side[0].model is not None
    with pytest.raises(ProofError, match="side conditions"):
        extract_certificate(p, session)
    assert "red" in export_dot(p)
    with pytest.raises(ProofError):
        apply_se(p, p.root)
    assert c in p.open_leaves()


def test_bounded_certificate(session):
    ts = jump_system()
    p = PartialProof(ts)
    leaf = p.root
    for _ in range(2):
        leaf = apply_se(p, leaf, session)
    cert = extract_certificate(p, session)
    assert cert.verdict is Verdict.BOUNDED_SAFE and cert.bound == 1
    assert cert.verdict.exit_code == 0


def test_axiom_on_empty_init(session):
    ts = empty_init_system()
    p = PartialProof(ts)
    apply_axiom(p, p.root, session)
    cert = extract_certificate(p, session)
    assert cert.verdict is Verdict.SAFE


def test_close_by_disjunction(session):
    ts = counter_system()
    p = PartialProof(ts)
    a = apply_se_cut(p, p.root, eq(x, 1), session)
    b = apply_se_cut(p, a, mk_atom(">=", x, 2), session)
    c = apply_se_cut(p, b, mk_atom(">=", x, 3), session)
    assert close_by_disjunction(p, c, [a, b], session)
    assert p.is_closed() and check_global_trace(p) == []
    assert extract_certificate(p, session).verdict is Verdict.SAFE


def test_reopen_drops_subtree(session):
    p, a, b = counter_proof(session)
    p.reopen(a)
    assert p.open_leaves() == [a]
    assert b not in p.nodes and not p.links()


def test_export_dot_structure(session):
    p, a, b = counter_proof(session)
    dot = export_dot(p)
    assert dot.startswith("digraph proof {") and dot.rstrip().endswith("}")
    assert "style=dashed" in dot
    assert f"n{p.root} -> n{a};" in dot
    for nid in p.nodes:
        assert f"  n{nid} [label=" in dot


def test_cut_sequence_round_trip(session):
    ts = jump_system()
    phis = [ts.init, le(x, 1), TRUE]
    p = PartialProof.from_cut_sequence(ts, phis)
    assert p.cut_sequence() == phis
    assert CutSequence(p.cut_sequence()).n == 2
    assert cut_sequence_violations(ts, phis, session) == []
    assert session.is_sat(bounded_unroll_formula(ts, 3))
    assert not session.is_sat(bounded_unroll_formula(ts, 2))


def test_refinement_checks(session):
    ts = jump_system()
    phis = [ts.init, le(x, 1), TRUE]
    good = [ts.init, eq(x, 1), le(x, 2)]
    assert refinement_violations(ts, phis, good, session) == []
    assert conservativity_level(phis, good, session) == 0
    bad = [ts.init, eq(x, 1), TRUE]
    assert refinement_violations(ts, phis, bad, session) == ["phi'_n does not entail the assertion"]
    assert refinement_violations(ts, phis, good[:2], session)


def test_replay_trace():
    ts = jump_system()
    trace = [Model({x: v}) for v in (0, 1, 2, 3)]
    assert replay_trace(ts, trace)
    assert not replay_trace(ts, trace[:3])
    assert not replay_trace(ts, [Model({x: 0}), Model({x: 3})])
    assert not replay_trace(ts, [])
