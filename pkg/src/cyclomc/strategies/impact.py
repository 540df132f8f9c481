"""Lazy abstraction with interpolants (IMPACT) and its maximally conservative variant.

Both loops keep the proof a single chain of SE+Cut steps.  The deepest
leaf is expanded with the cut ``true``; when its formula breaks the
assertion the chain is refined, and after every change each node is tested
for covering by one of its ancestors.
"""

from __future__ import annotations

from dataclasses import replace

from cyclomc.backend import BackendUnknown, SolverSession
from cyclomc.interpolate import InterpolationError, NoInterpolant, ThetaSequence, seq_interpolant
from cyclomc.logic import TRUE, TransitionSystem, conj
from cyclomc.proof import (
    Certificate,
    PartialProof,
    ProofError,
    apply_se_cut,
    extract_certificate,
    replay_trace,
    try_link,
)
from cyclomc.qelim import simplify
from cyclomc.strategies.common import (
    DEFAULT_BUDGET,
    Budget,
    BudgetExhausted,
    ModelStream,
    RefinementFailed,
    unrolled_trace,
)
from cyclomc.strategies.mcr import DEFAULT_STRENGTH, ENGINES


class _Unsafe(Exception):
    def __init__(self, trace):
        self.trace = trace


def _interpolant_refiner(session, strength):
    def refine(ts, phis):
        seq = ThetaSequence.from_cuts(ts, phis)
        try:
            itp = seq_interpolant(session, seq, strength)
        except NoInterpolant as exc:
            raise _Unsafe(exc.trace) from exc
        psis = itp.cuts(ts.state_vars)
        return [phis[0]] + [simplify(conj(phi, psi)) for phi, psi in zip(phis[1:], psis)]
    return refine


def _mc_refiner(session, engine, budget, strength, models):
    run = ENGINES[engine]
    kw = {"strength": strength}
    if engine.startswith("indpdr") and models is not None:
        kw["models"] = models

    def refine(ts, phis):
        try:
            return list(run(ts, phis, session, budget, **kw).phis)
        except RefinementFailed as exc:
            trace = exc.trace or unrolled_trace(ts, session, len(phis) - 1)
            if trace is None:
                raise InterpolationError("no refinement over the rationals but no integer "
                                         f"counterexample of length {len(phis) - 1}") from exc
            raise _Unsafe(trace) from exc
    return refine


class _Cover:
    """Cached ``phi_i |= phi_j`` checks between chain nodes."""

    def __init__(self, session):
        self.session = session
        self.cache = {}

    def entails(self, a, b) -> bool:
        key = (a, b)
        if key not in self.cache:
            self.cache[key] = self.session.entails(a, b)
        return self.cache[key]

    def close(self, p: PartialProof) -> bool:
        chain = p.chain()
        for i, nid in enumerate(chain[1:], 1):
            phi = p[nid].lhs
            if any(self.entails(phi, p[a].lhs) for a in chain[:i]):
                p.reopen(nid)
                if try_link(p, nid, self.session) is None:
                    raise ProofError(f"covering of node {nid} did not link")
                return True
        return False


def _loop(ts: TransitionSystem, session: SolverSession, budget: Budget, refine, name: str) -> Certificate:
    p = PartialProof(ts)
    cover = _Cover(session)
    refinements = 0

    def stats():
        return {"refinements": refinements, "nodes": len(p)}

    try:
        while True:
            chain = p.chain()
            leaf = chain[-1]
            phis = [p[i].lhs for i in chain]
            if not session.entails(phis[-1], ts.assertion):
                refinements += 1
                if refinements > budget.max_refinements:
                    raise BudgetExhausted("refinements", refinements - 1)
                new = refine(ts, phis)
                for nid, old, f in zip(chain, phis, new):
                    if f != old:
                        p.set_lhs(nid, f)
            if cover.close(p):
                cert = extract_certificate(p, session)
                return replace(cert, strategy=name, stats=stats())
            if p[leaf].depth >= budget.max_unrollings:
                raise BudgetExhausted("unrollings", p[leaf].depth)
            apply_se_cut(p, leaf, TRUE)
    except _Unsafe as exc:
        if exc.trace is None or not replay_trace(ts, exc.trace):
            return Certificate.unknown("counterexample does not replay", proof=p, strategy=name, stats=stats())
        return Certificate.unsafe(exc.trace, strategy=name, stats=stats())
    except (BudgetExhausted, InterpolationError, BackendUnknown) as exc:
        return Certificate.unknown(str(exc), proof=p, strategy=name, stats=stats())


def impact(ts: TransitionSystem, session: SolverSession, budget: Budget = DEFAULT_BUDGET,
           strength: str = DEFAULT_STRENGTH) -> Certificate:
    """Refine by sequence interpolation over the whole chain."""
    return _loop(ts, session, budget, _interpolant_refiner(session, strength), "impact")


def impact_mc(ts: TransitionSystem, session: SolverSession, engine: str = "ind",
              budget: Budget = DEFAULT_BUDGET, strength: str = DEFAULT_STRENGTH,
              models: ModelStream | None = None) -> Certificate:
    """Refine with a maximally conservative refinement engine (naive, ind, indpdr, indpdr-mbp)."""
    if engine not in ENGINES:
        raise ValueError(f"unknown engine {engine!r}")
    refine = _mc_refiner(session, engine, budget, strength, models)
    return _loop(ts, session, budget, refine, f"impact-mc/{engine}")
