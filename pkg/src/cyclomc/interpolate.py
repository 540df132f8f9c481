"""Binary, sequence and maximally conservative interpolants.

Interpolants are computed by quantifier elimination, so they exist exactly
when the input is unsatisfiable over the rationals.  Three strengths are
offered:

``strongest``
    forward images, ``psi_i = exists(local vars). psi_{i-1} & theta_i``.
``weakest``
    backward preconditions, ``psi_i = forall(local vars). theta_{i+1} -> psi_{i+1}``.
``generalized``
    the strongest cubes with literals greedily dropped while each cube still
    refutes the rest of the sequence.  This is what the verification
    strategies use by default: it keeps the image shape of the strongest
    interpolant but does not memorise individual states.

Every result is re-checked.  Over Int a generalized cube can let the next
(rational) image pick up integer points without an integer predecessor, so a
generalized sequence that fails its clauses is recomputed as the strongest
one, then the weakest; InterpolationError is raised only when all of them
fail, instead of returning something wrong.
"""

from __future__ import annotations

import contextlib
from collections.abc import Callable, Sequence
from dataclasses import dataclass

from cyclomc.backend import BackendUnknown, SatStatus, SolverSession
from cyclomc.logic import (
    FALSE,
    TRUE,
    Atom,
    Formula,
    Model,
    TransitionSystem,
    Var,
    conj,
    disj,
    mk_atom,
    neg,
    rename,
)
from cyclomc.qelim import (
    cubes_to_formula,
    dnf_cubes,
    qe_exists,
    qe_forall,
    simplify,
    simplify_cubes,
)

STRENGTHS = ("strongest", "weakest", "generalized")


class NoInterpolant(Exception):
    """The input is satisfiable; ``model`` witnesses it and ``trace`` (when
    the input came from a cut sequence) lists the states step by step."""

    def __init__(self, model: Model, trace: tuple[Model, ...] | None = None):
        super().__init__(f"satisfiable: {model}")
        self.model = model
        self.trace = trace


class InterpolationError(RuntimeError):
    """A computed candidate failed re-validation (rational relaxation of Int)."""


@dataclass(frozen=True)
class ThetaSequence:
    """``theta_1 .. theta_{n+1}`` over step-indexed copies of the state variables."""

    thetas: tuple[Formula, ...]
    state_vars: tuple[Var, ...] = ()

    @classmethod
    def from_cuts(cls, ts: TransitionSystem, phis: Sequence[Formula],
                  assertion: Formula | None = None) -> ThetaSequence:
        n = len(phis) - 1
        bad = neg(ts.assertion if assertion is None else assertion)
        if n == 0:
            return cls((ts.at(conj(phis[0], bad), 0),), ts.state_vars)
        thetas = [conj(ts.at(phis[0], 0), ts.trans_at(0))]
        for i in range(1, n):
            thetas.append(conj(ts.at(phis[i], i), ts.trans_at(i)))
        thetas.append(ts.at(conj(phis[n], bad), n))
        return cls(tuple(thetas), ts.state_vars)

    @property
    def n(self) -> int:
        return len(self.thetas) - 1

    def suffix(self, k: int) -> tuple[Formula, ...]:
        """``theta_{k+1} .. theta_{n+1}``."""
        return self.thetas[k:]

    def trace(self, model: Model) -> tuple[Model, ...] | None:
        if not self.state_vars:
            return None
        return tuple(model.at_step(self.state_vars, k) for k in range(self.n + 1))


@dataclass(frozen=True)
class SeqInterpolant:
    """``psi_0 = true, psi_1 .. psi_n, psi_{n+1} = false``."""

    psis: tuple[Formula, ...]
    level: int | None = None

    def cuts(self, state_vars: Sequence[Var]) -> list[Formula]:
        """``psi_1 .. psi_n`` read back over the unindexed state variables."""
        out = []
        for i in range(1, len(self.psis) - 1):
            out.append(rename(self.psis[i], {v.at(i): v for v in state_vars}))
        return out


# --------------------------------------------------------------------------
# observation hook (used by tests to re-check every interpolant produced)

_observers: list[list] = []


@contextlib.contextmanager
def capture():
    """Collect ``(ThetaSequence | tuple, SeqInterpolant)`` for every sequence interpolant."""
    bucket: list = []
    _observers.append(bucket)
    try:
        yield bucket
    finally:
        _observers.remove(bucket)


def _record(thetas, result):
    for bucket in _observers:
        bucket.append((thetas, result))


# --------------------------------------------------------------------------
# helpers


def _split_eqs(cube: list[Atom]) -> list[Atom]:
    out = []
    for a in cube:
        if a.op == "=":
            out.append(mk_atom("<=", a.lhs, a.bound))
            out.append(mk_atom(">=", a.lhs, a.bound))
        else:
            out.append(a)
    return out


def generalize_cubes(cubes: list[list[Atom]], ok: Callable[[Formula], bool]) -> Formula:
    """Drop literals from each cube while ``ok`` keeps holding for it."""
    out = []
    for cube in cubes:
        lits = sorted(set(_split_eqs(cube)), key=str)
        i = 0
        while i < len(lits):
            cand = lits[:i] + lits[i + 1:]
            if ok(conj(*cand)):
                lits = cand
            else:
                i += 1
        out.append(lits)
    return cubes_to_formula(simplify_cubes(out))


def _unsat(session: SolverSession, f: Formula) -> bool:
    r = session.check_sat(f)
    if r.status is SatStatus.UNKNOWN:
        raise BackendUnknown(r.reason)
    return r.status is SatStatus.UNSAT


def _strongest_cubes(vs, f: Formula) -> list[list[Atom]]:
    g = qe_exists(vs, f)
    return simplify_cubes(dnf_cubes(g))


# --------------------------------------------------------------------------
# binary


def binary_interpolant(session: SolverSession, a: Formula, b: Formula, strength: str = "strongest") -> Formula:
    """A formula g over the shared variables with ``a |= g |= b``.

    Raises NoInterpolant when ``a`` does not entail ``b``.
    """
    if strength not in STRENGTHS:
        raise ValueError(f"unknown strength {strength!r}")
    r = session.check_entailment(a, b)
    if r.invalid:
        raise NoInterpolant(r.model)
    if not r.valid:
        raise BackendUnknown(r.reason)
    if strength == "weakest":
        g = simplify(qe_forall(b.free_vars - a.free_vars, b))
        if not session.entails(a, g):
            raise InterpolationError("weakest candidate not implied by a")
        return g
    local = a.free_vars - b.free_vars
    if strength == "strongest":
        g = simplify(qe_exists(local, a))
    else:
        g = generalize_cubes(_strongest_cubes(local, a), lambda c: session.entails(c, b))
    if not session.entails(g, b):
        if strength == "generalized":
            return binary_interpolant(session, a, b, "weakest")
        raise InterpolationError("candidate does not entail b")
    return g


# --------------------------------------------------------------------------
# sequences


def _fv_prefix_suffix(thetas):
    n1 = len(thetas)
    pre = [frozenset()] * (n1 + 1)
    suf = [frozenset()] * (n1 + 2)
    for i in range(n1):
        pre[i + 1] = pre[i] | thetas[i].free_vars
    for i in range(n1 - 1, -1, -1):
        suf[i] = suf[i + 1] | thetas[i].free_vars
    return pre, suf


def seq_interpolant(session: SolverSession, seq: ThetaSequence | Sequence[Formula],
                    strength: str = "strongest") -> SeqInterpolant:
    """Sequence interpolant for an unsatisfiable ``theta_1 & ... & theta_{n+1}``."""
    if strength not in STRENGTHS:
        raise ValueError(f"unknown strength {strength!r}")
    if not isinstance(seq, ThetaSequence):
        seq = ThetaSequence(tuple(seq))
    thetas = seq.thetas
    r = session.check_sat(conj(*thetas))
    if r.status is SatStatus.SAT:
        raise NoInterpolant(r.model, seq.trace(r.model))
    if r.status is SatStatus.UNKNOWN:
        raise BackendUnknown(r.reason)
    order = (strength,) if strength != "generalized" else ("generalized", "strongest", "weakest")
    for attempt in order:
        psis = _seq_candidate(session, thetas, attempt)
        bad = check_seq_interpolant(session, thetas, psis)
        if not bad:
            break
    else:
        raise InterpolationError("; ".join(bad))
    result = SeqInterpolant(tuple(psis))
    _record(seq, result)
    return result


def _seq_candidate(session, thetas, strength):
    n = len(thetas) - 1
    pre, suf = _fv_prefix_suffix(thetas)
    psis = [TRUE] * (n + 2)
    psis[n + 1] = FALSE
    if strength == "weakest":
        for i in range(n, 0, -1):
            body = disj(neg(thetas[i]), psis[i + 1])
            psis[i] = simplify(qe_forall(body.free_vars - pre[i], body))
    else:
        for i in range(1, n + 1):
            f = conj(psis[i - 1], thetas[i - 1])
            local = f.free_vars - suf[i]
            if strength == "strongest":
                psis[i] = simplify(qe_exists(local, f))
            else:
                rest = conj(*thetas[i:])
                psis[i] = generalize_cubes(_strongest_cubes(local, f),
                                           lambda c, rest=rest: _unsat(session, conj(c, rest)))
    return psis


def check_seq_interpolant(session: SolverSession, thetas: Sequence[Formula],
                          psis: Sequence[Formula]) -> list[str]:
    """Violated interpolant clauses (empty when ``psis`` is a sequence interpolant)."""
    if isinstance(thetas, ThetaSequence):
        thetas = thetas.thetas
    n = len(thetas) - 1
    out = []
    if len(psis) != n + 2:
        return [f"expected {n + 2} formulas, got {len(psis)}"]
    if psis[0] != TRUE and not session.entails(TRUE, psis[0]):
        out.append("psi_0 is not true")
    if psis[n + 1] != FALSE and session.is_sat(psis[n + 1]):
        out.append("psi_{n+1} is not false")
    pre, suf = _fv_prefix_suffix(thetas)
    for i in range(1, n + 2):
        if not session.entails(conj(psis[i - 1], thetas[i - 1]), psis[i]):
            out.append(f"psi_{i - 1} & theta_{i} does not entail psi_{i}")
    for i in range(0, n + 2):
        extra = psis[i].free_vars - (pre[i] & suf[i])
        if extra:
            out.append(f"psi_{i} mentions {sorted(map(str, extra))}")
    return out


def mc_interpolant(session: SolverSession, seq: ThetaSequence,
                   strength: str = "strongest") -> SeqInterpolant:
    """Sequence interpolant with the longest possible prefix of ``true``.

    ``level`` is the largest k such that ``theta_{k+1} & ... & theta_{n+1}``
    is unsatisfiable; ``psi_0 .. psi_k`` are all ``true``.
    """
    n = seq.n
    for k in range(n, -1, -1):
        suffix = seq.suffix(k)
        r = session.check_sat(conj(*suffix))
        if r.status is SatStatus.UNKNOWN:
            raise BackendUnknown(r.reason)
        if r.status is SatStatus.SAT:
            if k == 0:
                raise NoInterpolant(r.model, seq.trace(r.model))
            continue
        tail = seq_interpolant(session, ThetaSequence(suffix, seq.state_vars), strength)
        result = SeqInterpolant((TRUE,) * (k + 1) + tail.psis[1:], level=k)
        _record(seq, result)
        return result
    raise AssertionError("unreachable")
