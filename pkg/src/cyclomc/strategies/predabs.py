"""Predicate abstraction: every cut is the conjunction of the implied predicates."""

from __future__ import annotations

from collections.abc import Iterable
from dataclasses import replace

from cyclomc.backend import BackendUnknown, SolverSession
from cyclomc.logic import Formula, TransitionSystem, conj
from cyclomc.proof import (
    Certificate,
    PartialProof,
    Status,
    apply_se_cut,
    extract_certificate,
    try_link,
)
from cyclomc.strategies.common import DEFAULT_BUDGET, Budget, unrolled_trace


def abstract_post(ts: TransitionSystem, phi: Formula, preds: list[Formula], session: SolverSession) -> Formula:
    img = ts.image_formula(phi)
    return conj(*(xi for xi in preds if session.entails(img, xi)))


def predicate_abstraction(ts: TransitionSystem, preds: Iterable[Formula], session: SolverSession,
                          budget: Budget = DEFAULT_BUDGET) -> Certificate:
    """Sound for Safe only: an abstract counterexample that does not replay gives Unknown."""
    preds = sorted(set(preds), key=str)
    p = PartialProof(ts)
    leaf = p.root
    for _ in range(budget.max_unrollings + 1):
        node = p[leaf]
        if node.depth > 0 and try_link(p, leaf, session) is not None:
            return _done(extract_certificate(p, session))
        cut = abstract_post(ts, node.lhs, preds, session)
        child = apply_se_cut(p, leaf, cut, session)
        st = node.side[1].status
        if st is Status.UNKNOWN or node.side[0].status is not Status.VALID:
            raise BackendUnknown(f"side condition at depth {node.depth}")
        if st is Status.INVALID:
            trace = unrolled_trace(ts, session, node.depth)
            if trace is not None:
                return _done(Certificate.unsafe(trace))
            return _done(Certificate.unknown(f"abstract counterexample of length {node.depth}", proof=p))
        leaf = child
    return _done(Certificate.unknown("unrolling budget exhausted", proof=p))


def _done(c: Certificate) -> Certificate:
    return replace(c, strategy="predabs")
