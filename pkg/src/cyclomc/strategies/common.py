"""Budgets, model sources and trace helpers shared by the strategies."""

from __future__ import annotations

import random
from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from fractions import Fraction

from cyclomc.backend import BackendUnknown, SatStatus, SolverSession
from cyclomc.logic import Formula, Model, TransitionSystem, conj, disj, evaluate, mk_atom
from cyclomc.proof import bounded_unroll_formula, replay_trace


@dataclass(frozen=True)
class Budget:
    max_unrollings: int = 64
    max_refinements: int = 256
    max_iterations: int = 10_000


DEFAULT_BUDGET = Budget()


class BudgetExhausted(Exception):
    def __init__(self, resource: str, used: int):
        super().__init__(f"{resource} budget exhausted after {used}")
        self.resource = resource
        self.used = used


class RefinementFailed(Exception):
    """The cut sequence has no refinement: a counterexample of its length exists."""

    def __init__(self, msg: str = "no refinement", trace: tuple | None = None):
        super().__init__(msg)
        self.trace = trace


class ModelStream:
    """Where strategies get witnesses for satisfiable queries.

    The default asks the solver.  Subclasses may substitute other models as
    long as they satisfy the query.
    """

    def pick(self, session: SolverSession, f: Formula) -> Model | None:
        r = session.check_sat(f)
        if r.status is SatStatus.UNKNOWN:
            raise BackendUnknown(r.reason)
        return r.model


class ScriptedModels(ModelStream):
    """Serves models from a fixed schedule when they satisfy the query.

    A scripted model is only consumed when it satisfies the formula being
    queried (missing variables count as a mismatch); otherwise the solver is
    asked and the script is left untouched.
    """

    def __init__(self, script: Iterable[Mapping]):
        self._script = iter(script)
        self._peek = None
        self.served = 0

    def _next(self):
        if self._peek is None:
            self._peek = next(self._script, None)
        return self._peek

    def pick(self, session: SolverSession, f: Formula) -> Model | None:
        cand = self._next()
        if cand is not None:
            values = {v: Fraction(x) for v, x in cand.items()}
            try:
                ok = evaluate(f, values) if f.free_vars <= set(values) else False
            except Exception:  # noqa: BLE001 - quantified query: not scriptable
                ok = False
            if ok:
                self._peek = None
                self.served += 1
                return Model({v: values[v] for v in f.free_vars})
        return super().pick(session, f)


def unrolled_trace(ts: TransitionSystem, session: SolverSession, k: int) -> tuple[Model, ...] | None:
    """A concrete path of exactly ``k`` steps from init to a bad state, or None."""
    r = session.check_sat(bounded_unroll_formula(ts, k))
    if r.status is SatStatus.UNKNOWN:
        raise BackendUnknown(r.reason)
    if r.model is None:
        return None
    full = {v: Fraction(0) for i in range(k + 1) for v in (s.at(i) for s in ts.state_vars)}
    full.update(r.model)
    trace = tuple(Model(full).at_step(ts.state_vars, i) for i in range(k + 1))
    assert replay_trace(ts, trace), "solver model does not replay"
    return trace


def shortest_trace(ts: TransitionSystem, session: SolverSession, upto: int) -> tuple[Model, ...] | None:
    for k in range(upto + 1):
        t = unrolled_trace(ts, session, k)
        if t is not None:
            return t
    return None


class SeededModels(ModelStream):
    """Replayable variation on the solver's model choice.

    For each query a seeded generator picks how many earlier models to
    block (0 to ``spread``); the last model found is returned.  The same
    seed and backend give the same sequence of answers.
    """

    def __init__(self, seed: int, spread: int = 2):
        self.rng = random.Random(seed)
        self.spread = spread

    def pick(self, session: SolverSession, f: Formula) -> Model | None:
        m = super().pick(session, f)
        if m is None:
            return None
        for _ in range(self.rng.randint(0, self.spread)):
            block = disj(*(mk_atom("!=", v, q) for v, q in m.items()))
            nxt = super().pick(session, conj(f, block))
            if nxt is None:
                break
            m = Model({v: nxt.get(v, q) for v, q in m.items()})
        return m
