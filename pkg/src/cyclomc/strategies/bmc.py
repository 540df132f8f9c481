"""Bounded model checking as partial proofs, forward and backward."""

from __future__ import annotations

from dataclasses import replace

from cyclomc.backend import BackendUnknown, SolverSession
from cyclomc.logic import TransitionSystem, conj, disj, neg
from cyclomc.proof import (
    Certificate,
    PartialProof,
    Status,
    apply_axiom,
    apply_se,
    close_by_disjunction,
    extract_certificate,
)
from cyclomc.qelim import pre_image, simplify
from cyclomc.strategies.common import shortest_trace, unrolled_trace


def _unroll_rest(ts, session, start: int, k: int, name: str) -> Certificate:
    # Images are projected over the rationals; when one of them breaks the
    # assertion without an integer witness the chain is useless and the
    # remaining depths are decided by plain unrolling.
    for j in range(start, k + 1):
        trace = unrolled_trace(ts, session, j)
        if trace is not None:
            return Certificate.unsafe(trace, strategy=name)
    return Certificate.bounded_safe(k, strategy=name, reason="decided by unrolling")


def _run(ts: TransitionSystem, k: int, session: SolverSession, name: str, forward: bool) -> Certificate:
    if k < 0:
        raise ValueError("bound must be non-negative")
    p = PartialProof(ts)
    leaf = p.root
    seen: list[int] = []
    for depth in range(k + 1):
        phi = p[leaf].lhs
        if forward:
            if not session.is_sat(phi):
                apply_axiom(p, leaf, session)
                return replace(extract_certificate(p, session), strategy=name)
            if seen and session.entails(phi, disj(*(p[i].lhs for i in seen))):
                close_by_disjunction(p, leaf, seen, session)
                return replace(extract_certificate(p, session), strategy=name)
            seen.append(leaf)
        node = p[leaf]
        leaf = apply_se(p, leaf, session)
        status = node.side[0].status
        if status is Status.UNKNOWN:
            raise BackendUnknown(f"side condition at depth {depth}")
        if status is Status.INVALID:
            trace = unrolled_trace(ts, session, depth)
            if trace is not None:
                return Certificate.unsafe(trace, strategy=name)
            return _unroll_rest(ts, session, depth + 1, k, name)
    return Certificate.bounded_safe(k, p, strategy=name)


def bmc(ts: TransitionSystem, k: int, session: SolverSession) -> Certificate:
    """Unroll k+1 symbolic-execution steps; BoundedSafe(k) when every side condition holds."""
    return _run(ts, k, session, "bmc", forward=False)


def forward_criterion(ts: TransitionSystem, k: int, session: SolverSession) -> Certificate:
    """bmc that closes the proof once no state at the next distance is new."""
    return _run(ts, k, session, "forward", forward=True)


def back_bmc(ts: TransitionSystem, k: int, session: SolverSession) -> Certificate:
    """Backward unrolling: ``psi_0 = a``, ``psi_{j+1} = a & wp(psi_j)``.

    ``psi_j`` holds the states that stay safe for j more steps, so init
    leaving ``psi_j`` means a counterexample of length at most j.  The
    complement ``bad_j = !psi_j`` is what is stored, since
    ``!wp(psi) = pre(!psi)`` needs no negation of the growing formula.
    """
    if k < 0:
        raise ValueError("bound must be non-negative")
    stop = simplify(neg(ts.assertion))
    bad = stop
    stable = False
    for j in range(k + 1):
        if session.is_sat(conj(ts.init, bad)):
            trace = shortest_trace(ts, session, j)
            if trace is not None:
                return Certificate.unsafe(trace, strategy="back-bmc")
        if j == k or stable:
            continue
        nxt = simplify(disj(stop, pre_image(ts, bad)))
        stable = session.equivalent(nxt, bad)
        bad = nxt
    return Certificate.bounded_safe(k, strategy="back-bmc")
