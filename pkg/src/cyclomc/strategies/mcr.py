"""Maximally conservative refinement of cut sequences.

A refinement of ``phi_0 .. phi_n`` strengthens the cuts so that the chain
stays a valid partial proof and ``phi'_n`` entails the assertion.  It is
k-conservative when ``phi_0 .. phi_k`` are untouched.  All engines here
return a refinement with the largest achievable k, or raise
RefinementFailed when there is none (a real counterexample of length n).
"""

from __future__ import annotations

from collections import Counter
from collections.abc import Sequence
from dataclasses import dataclass, field
from fractions import Fraction

from cyclomc.backend import SolverSession
from cyclomc.interpolate import NoInterpolant, ThetaSequence, binary_interpolant, mc_interpolant
from cyclomc.logic import (
    Formula,
    LinExpr,
    TransitionSystem,
    conj,
    disj,
    neg,
    substitute_unchecked,
)
from cyclomc.proof import CutSequence
from cyclomc.qelim import MbpFlavor, mbp, qe_exists, simplify
from cyclomc.strategies.common import (
    DEFAULT_BUDGET,
    Budget,
    BudgetExhausted,
    ModelStream,
    RefinementFailed,
)

DEFAULT_STRENGTH = "generalized"


def frames(phis: Sequence[Formula]) -> list[Formula]:
    """``F_j = phi_0 | ... | phi_j``."""
    return [disj(*phis[:j + 1]) for j in range(len(phis))]


def _seq(phis) -> list[Formula]:
    return list(phis.phis if isinstance(phis, CutSequence) else phis)


def naive_mcr(ts: TransitionSystem, phis, session: SolverSession, *,
              assertion: Formula | None = None, strength: str = DEFAULT_STRENGTH) -> CutSequence:
    """Try to keep ``phi_0 .. phi_j`` for j = n-1 down to 0, interpolating the rest."""
    a = ts.assertion if assertion is None else assertion
    phis = _seq(phis)
    if session.entails(phis[-1], a):
        return CutSequence(phis)
    seq = ThetaSequence.from_cuts(ts, phis, assertion=a)
    try:
        itp = mc_interpolant(session, seq, strength)
    except NoInterpolant as exc:
        raise RefinementFailed("the whole sequence is satisfiable", exc.trace) from exc
    out = list(phis[:itp.level + 1])
    for i in range(itp.level + 1, len(phis)):
        psi = itp.cuts(ts.state_vars)[i - 1]
        out.append(simplify(conj(phis[i], psi)))
    return CutSequence(out)


def _unprime_interpolant(ts, session, prev: Formula, target: Formula, a: Formula, strength) -> Formula:
    """Cut for the last position: interpolant of ``prev & trans`` and ``target(x') & a(x')``."""
    g = binary_interpolant(session, conj(prev, ts.trans), ts.prime(conj(target, a)), strength)
    return simplify(ts.unprime(g))


def ind_mcr(ts: TransitionSystem, assertion: Formula | None, phis, session: SolverSession, *,
            strength: str = DEFAULT_STRENGTH) -> CutSequence:
    """Recursive refinement: the prefix must avoid states with a bad successor."""
    a0 = ts.assertion if assertion is None else assertion

    def rec(a: Formula, phis: list[Formula]) -> list[Formula]:
        if session.is_sat(conj(ts.init, neg(a))):
            raise RefinementFailed(f"init violates the assertion at level {len(phis) - 1}")
        if session.entails(phis[-1], a):
            return phis
        gamma = qe_exists(ts.primed_vars, conj(ts.trans, ts.prime(neg(a))))
        prefix = rec(neg(gamma), phis[:-1])
        return prefix + [_unprime_interpolant(ts, session, prefix[-1], phis[-1], a, strength)]

    return CutSequence(rec(a0, _seq(phis)))


@dataclass
class PdrStats:
    """Loop iterations and blocked cubes per recursion level (level = n of the call)."""

    iterations: Counter = field(default_factory=Counter)
    gammas: dict = field(default_factory=dict)

    def record(self, level: int, gamma: Formula):
        self.iterations[level] += 1
        self.gammas.setdefault(level, []).append(gamma)


def ind_pdr(ts: TransitionSystem, phis, session: SolverSession, budget: Budget = DEFAULT_BUDGET, *,
            models: ModelStream | None = None, flavor: MbpFlavor | None = None,
            primed: bool = False, strength: str = DEFAULT_STRENGTH,
            stats: PdrStats | None = None) -> CutSequence:
    """PDR by structural induction on the cut sequence.

    Without ``flavor`` each iteration blocks the exact predecessors of one
    bad successor; with ``flavor`` the blocked set is a model-based
    projection of ``trans & !a(x')`` (or, with ``primed``, of
    ``phi_{n-1} & trans & !a(x')``, which may diverge).  Each level's loop is
    capped by ``budget.max_iterations``.
    """
    models = models or ModelStream()
    stats = stats if stats is not None else PdrStats()
    primes = ts.primed_vars

    def rec(a: Formula, phis: list[Formula]) -> list[Formula]:
        n = len(phis) - 1
        if session.is_sat(conj(ts.init, neg(a))):
            raise RefinementFailed(f"init violates the assertion at level {n}")
        if session.entails(phis[-1], a):
            return phis
        phis = list(phis)
        bad_next = conj(ts.trans, ts.prime(neg(a)))
        count = 0
        while True:
            m = models.pick(session, conj(phis[n - 1], bad_next))
            if m is None:
                break
            count += 1
            if count > budget.max_iterations:
                raise BudgetExhausted("loop iterations", count - 1)
            full = {v: m.get(v, Fraction(0)) for v in (*ts.state_vars, *primes)}
            if flavor is None:
                gamma = substitute_unchecked(ts.trans, {p: LinExpr((), full[p]) for p in primes})
            else:
                body = conj(phis[n - 1], bad_next) if primed else bad_next
                gamma = mbp(flavor, body, primes, full)
            stats.record(n, gamma)
            phis[:n] = rec(neg(gamma), phis[:n])
        phis[n] = _unprime_interpolant(ts, session, phis[n - 1], phis[n], a, strength)
        return phis

    return CutSequence(rec(ts.assertion, _seq(phis)))


def ind_pdr_mbp(ts: TransitionSystem, phis, session: SolverSession,
                flavor: MbpFlavor = MbpFlavor.LW, budget: Budget = DEFAULT_BUDGET, **kw) -> CutSequence:
    return ind_pdr(ts, phis, session, budget, flavor=flavor, **kw)


ENGINES = {
    "naive": lambda ts, phis, session, budget, **kw: naive_mcr(ts, phis, session, **kw),
    "ind": lambda ts, phis, session, budget, **kw: ind_mcr(ts, None, phis, session, **kw),
    "indpdr": lambda ts, phis, session, budget, **kw: ind_pdr(ts, phis, session, budget, **kw),
    "indpdr-mbp": lambda ts, phis, session, budget, **kw: ind_pdr_mbp(ts, phis, session, MbpFlavor.LW,
                                                                      budget, **kw),
}
