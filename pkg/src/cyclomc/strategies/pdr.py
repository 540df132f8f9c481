"""sPDR and IndPDR as transition systems over configurations, run in lockstep.

A configuration ``(c_k .. c_n || F_0 .. F_n)`` pairs a (possibly empty)
chain of candidate counterexamples with one formula per level.  For sPDR
the formulas are frames; for IndPDR they are the cut formulas of IMPACT/mc,
whose frames are the running disjunctions.

Both engines share one scheduling policy (``choose``).  It reads the
leader's frames and emits a Step; the other engine only checks that the
step is legal under its own rules before applying it.  ``bisim_check``
replays the two logs and checks ``F_j <=> phi_0 | ... | phi_j`` at every
step.
"""

from __future__ import annotations

import hashlib
import json
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field, replace
from fractions import Fraction

from cyclomc.backend import BackendUnknown, SolverSession
from cyclomc.interpolate import NoInterpolant, binary_interpolant
from cyclomc.logic import (
    TRUE,
    Formula,
    LinExpr,
    Model,
    TransitionSystem,
    conj,
    disj,
    evaluate,
    mk_atom,
    neg,
    substitute_unchecked,
)
from cyclomc.proof import (
    Certificate,
    PartialProof,
    apply_axiom,
    extract_certificate,
    replay_trace,
    try_link,
)
from cyclomc.qelim import post_image, simplify
from cyclomc.strategies.common import DEFAULT_BUDGET, Budget, ModelStream
from cyclomc.strategies.mcr import frames
from cyclomc.syntax import FormulaReader, formula_sexp, parse_sexp


@dataclass(frozen=True)
class PdrConfig:
    cexs: tuple[Model, ...]
    phis: tuple[Formula, ...]

    @property
    def n(self) -> int:
        return len(self.phis) - 1

    @property
    def k(self) -> int:
        """Level of the first counterexample (n + 1 when there is none)."""
        return self.n + 1 - len(self.cexs)


@dataclass(frozen=True)
class Step:
    """``rule`` is Candidate, Decide, Conflict, Unfold, Induction or ConflictPDR."""

    rule: str
    state: Model | None = None
    psi: Formula | None = None
    level: int | None = None


@dataclass(frozen=True)
class Outcome:
    """Terminal result of a run: SAFE (with level), UNSAFE (with trace) or STUCK/UNKNOWN."""

    kind: str
    level: int | None = None
    trace: tuple[Model, ...] | None = None
    reason: str = ""


def _state(ts: TransitionSystem, m) -> Model:
    return Model({v: Fraction(m.get(v, 0)) for v in ts.state_vars})


def _step_ok(ts: TransitionSystem, a: Model, b: Model) -> bool:
    m = dict(a)
    m.update({v.primed(): b[v] for v in ts.state_vars})
    return evaluate(ts.trans, m)


def _into(ts: TransitionSystem, c: Model) -> Formula:
    """``trans(x, c)`` as a formula over x."""
    return substitute_unchecked(ts.trans, {v.primed(): LinExpr((), c[v]) for v in ts.state_vars})


def _not_state(ts: TransitionSystem, c: Model) -> Formula:
    return disj(*(mk_atom("!=", v, c[v]) for v in ts.state_vars))


class _System:
    name = ""

    def __init__(self, ts: TransitionSystem, session: SolverSession):
        self.ts = ts
        self.session = session

    def initial(self) -> PdrConfig:
        return PdrConfig((), (self.ts.init,))

    def frame_view(self, cfg: PdrConfig) -> list[Formula]:
        raise NotImplementedError

    # rule premises shared by both engines once expressed through frame_view

    def _candidate(self, cfg, step) -> str | None:
        if cfg.cexs:
            return "counterexamples pending"
        if not (evaluate(cfg.phis[-1], step.state) and not evaluate(self.ts.assertion, step.state)):
            return "state is not a bad state of the last level"
        return None

    def _unfold(self, cfg, step) -> str | None:
        if cfg.cexs:
            return "counterexamples pending"
        if not self.session.entails(cfg.phis[-1], self.ts.assertion):
            return "last level is not safe"
        return None

    def illegal(self, cfg: PdrConfig, step: Step) -> str | None:
        """Why ``step`` is not a transition from ``cfg`` (None when it is)."""
        if step.rule == "Candidate":
            return self._candidate(cfg, step)
        if step.rule == "Unfold":
            return self._unfold(cfg, step)
        if not cfg.cexs or cfg.k == 0:
            return "no counterexample above level 0"
        if step.rule == "Decide":
            return self._decide(cfg, step)
        if step.rule == "Conflict":
            return self._conflict(cfg, step)
        return f"{self.name} has no rule {step.rule}"

    def apply(self, cfg: PdrConfig, step: Step) -> PdrConfig:
        if step.rule == "Candidate":
            return PdrConfig((step.state,), cfg.phis)
        if step.rule == "Unfold":
            return PdrConfig((), cfg.phis + (TRUE,))
        if step.rule == "Decide":
            return PdrConfig((step.state,) + cfg.cexs, cfg.phis)
        k = cfg.k
        phis = list(cfg.phis)
        if step.rule == "Conflict":
            phis[k] = simplify(conj(phis[k], step.psi))
        elif step.rule == "ConflictPDR":
            phis[1:k + 1] = [simplify(conj(f, step.psi)) for f in phis[1:k + 1]]
        elif step.rule == "Induction":
            phis[1:step.level + 1] = [simplify(conj(f, step.psi)) for f in phis[1:step.level + 1]]
            return PdrConfig(cfg.cexs, tuple(phis))
        else:
            raise ValueError(f"unknown rule {step.rule}")
        return PdrConfig(cfg.cexs[1:], tuple(phis))

    def safe_level(self, cfg: PdrConfig) -> int | None:
        """Some level whose frame is closed (0 when init is empty)."""
        if cfg.cexs:
            return None
        fr = self.frame_view(cfg)
        if not self.session.is_sat(fr[0]):
            return 0
        for ell in range(1, cfg.n + 1):
            if self.session.entails(fr[ell], fr[ell - 1]):
                return ell
        return None

    def invariant(self, cfg: PdrConfig, ell: int) -> Formula:
        return self.frame_view(cfg)[ell]

    def violations(self, cfg: PdrConfig) -> list[str]:
        """Configuration conditions (a)-(e), phrased over this engine's formulas."""
        ts, s = self.ts, self.session
        out = []
        fr = cfg.phis
        if not s.equivalent(fr[0], ts.init):
            out.append("(a) level 0 is not init")
        for i in range(cfg.n):
            if not s.entails(self._growth(fr[i]), fr[i + 1]):
                out.append(f"(b) level {i} does not flow into level {i + 1}")
            if not s.entails(fr[i], ts.assertion):
                out.append(f"(c) level {i} breaks the assertion")
        for i, c in zip(range(cfg.k, cfg.n + 1), cfg.cexs):
            if not evaluate(fr[i], c):
                out.append(f"(d) c_{i} is not in level {i}")
        for i, (a, b) in enumerate(zip(cfg.cexs, cfg.cexs[1:]), cfg.k):
            if not _step_ok(ts, a, b):
                out.append(f"(e) no transition c_{i} -> c_{i + 1}")
        if cfg.cexs and evaluate(ts.assertion, cfg.cexs[-1]):
            out.append("(e) c_n is not bad")
        return out


class SpdrSystem(_System):
    """Simplified PDR: formulas are frames."""

    name = "spdr"

    def frame_view(self, cfg):
        return list(cfg.phis)

    def _growth(self, f):
        return disj(f, self.ts.init, self.ts.image_formula(f))

    def _decide(self, cfg, step):
        k = cfg.k
        if not (evaluate(cfg.phis[k - 1], step.state) and _step_ok(self.ts, step.state, cfg.cexs[0])):
            return "state is not a predecessor of c_k in F_{k-1}"
        return None

    def _conflict(self, cfg, step):
        ts, s, k, psi = self.ts, self.session, cfg.k, step.psi
        prev = cfg.phis[k - 1]
        if not s.entails(disj(ts.init, ts.image_formula(prev)), psi):
            return "init | post(F_{k-1}) does not entail psi"
        if not s.entails(prev, psi):
            return "F_{k-1} does not entail psi"
        if evaluate(psi, cfg.cexs[0]):
            return "psi does not exclude c_k"
        return None

    def illegal(self, cfg, step):
        if step.rule == "ConflictPDR":
            if not cfg.cexs or cfg.k == 0:
                return "no counterexample above level 0"
            ts, s, psi = self.ts, self.session, step.psi
            if not s.entails(disj(ts.init, ts.image_formula(cfg.phis[cfg.k - 1])), psi):
                return "init | post(F_{k-1}) does not entail psi"
            return "psi does not exclude c_k" if evaluate(psi, cfg.cexs[0]) else None
        if step.rule == "Induction":
            ell, psi = step.level, step.psi
            if not 1 <= ell <= cfg.n:
                return "level out of range"
            for i, c in zip(range(cfg.k, cfg.n + 1), cfg.cexs):
                if i <= ell and not evaluate(psi, c):
                    return f"psi excludes the pending c_{i}"
            g = disj(self.ts.init, self.ts.image_formula(conj(cfg.phis[ell - 1], psi)))
            return None if self.session.entails(g, psi) else "psi is not inductive relative to F_{l-1}"
        return super().illegal(cfg, step)


class IndPdrSystem(_System):
    """IndPDR: formulas are the cuts of IMPACT/mc."""

    name = "indpdr"

    def frame_view(self, cfg):
        return frames(cfg.phis)

    def _growth(self, f):
        return self.ts.image_formula(f)

    def _decide(self, cfg, step):
        k = cfg.k
        if evaluate(self.ts.init, cfg.cexs[0]):
            return "c_k is initial"
        if not (evaluate(cfg.phis[k - 1], step.state) and _step_ok(self.ts, step.state, cfg.cexs[0])):
            return "state is not a predecessor of c_k in phi_{k-1}"
        return None

    def _conflict(self, cfg, step):
        k, psi = cfg.k, step.psi
        if not self.session.entails(self.ts.image_formula(cfg.phis[k - 1]), psi):
            return "post(phi_{k-1}) does not entail psi"
        if evaluate(psi, cfg.cexs[0]):
            return "psi does not exclude c_k"
        return None

    def safe_level(self, cfg):
        # IMPACT/mc covering: phi_l |= phi_0 | ... | phi_{l-1}
        if cfg.cexs:
            return None
        if not self.session.is_sat(cfg.phis[0]):
            return 0
        for ell in range(1, cfg.n + 1):
            if self.session.entails(cfg.phis[ell], disj(*cfg.phis[:ell])):
                return ell
        return None

    def invariant(self, cfg, ell):
        return disj(*cfg.phis[:ell + 1])


SYSTEMS = {"spdr": SpdrSystem, "indpdr": IndPdrSystem}


# --------------------------------------------------------------------------
# the shared policy


def conflict_formula(ts: TransitionSystem, session: SolverSession, fr: Sequence[Formula],
                     cexs: Sequence[Model], k: int, strength: str = "generalized") -> Formula | None:
    """A blocking formula for ``c_k`` containing init, F_{k-1} and post(F_{k-1}).

    The target is the level's assertion (``!trans(x, c_{k+1})`` below the
    top, the assertion at the top), or just ``x != c_k`` when the former is
    not implied.  None when ``c_k`` itself is in the source set.
    """
    src = simplify(disj(ts.init, fr[k - 1], post_image(ts, fr[k - 1])))
    ck = cexs[0]
    point = _not_state(ts, ck)
    level_assert = ts.assertion if len(cexs) == 1 else neg(_into(ts, cexs[1]))
    for target in (level_assert, point):
        try:
            psi = binary_interpolant(session, src, target, strength)
        except NoInterpolant:
            continue
        if evaluate(psi, ck):
            psi = conj(psi, point)
        return psi
    exact = disj(ts.init, fr[k - 1], ts.image_formula(fr[k - 1]))
    return _point_block(session, exact, point)


def _point_block(session: SolverSession, exact: Formula, point: Formula) -> Formula | None:
    # The image above is a rational relaxation: over Int, c_k can sit in it
    # without an integer predecessor.  The exact check then justifies x != c_k.
    return point if session.entails(exact, point) else None


def choose(ts: TransitionSystem, session: SolverSession, system: _System, cfg: PdrConfig,
           models: ModelStream, strength: str = "generalized", recover: bool = False) -> Step | Outcome:
    """The next step of the shared schedule, or a terminal Outcome.

    With counterexamples pending: report Unsafe at level 0 or when c_k is
    initial, else Decide, else Conflict.  Without: report Safe if some level
    is closed, else Candidate, else Unfold.
    """
    fr = system.frame_view(cfg)
    if cfg.cexs:
        k, ck = cfg.k, cfg.cexs[0]
        if k == 0 or evaluate(ts.init, ck):
            return Outcome("UNSAFE", trace=tuple(cfg.cexs))
        m = models.pick(session, conj(fr[k - 1], _into(ts, ck)))
        if m is not None:
            return Step("Decide", _state(ts, m))
        psi = conflict_formula(ts, session, fr, cfg.cexs, k, strength)
        if psi is not None:
            return Step("Conflict", psi=psi)
        if recover:
            src = disj(ts.init, post_image(ts, fr[k - 1]))
            try:
                psi = binary_interpolant(session, src, _not_state(ts, ck), strength)
            except NoInterpolant:
                psi = _point_block(session, disj(ts.init, ts.image_formula(fr[k - 1])), _not_state(ts, ck))
            if psi is not None:
                return Step("ConflictPDR", psi=psi)
        return Outcome("STUCK", reason=f"c_{k} lies in frame {k - 1} but has no predecessor there")
    ell = system.safe_level(cfg)
    if ell is not None:
        return Outcome("SAFE", level=ell)
    m = models.pick(session, conj(fr[-1], neg(ts.assertion)))
    if m is not None:
        return Step("Candidate", _state(ts, m))
    return Step("Unfold")


# --------------------------------------------------------------------------
# logs


def _model_json(m: Model):
    return {str(v): str(q) for v, q in sorted(m.items(), key=lambda kv: kv[0].key)}


def config_json(cfg: PdrConfig) -> dict:
    return {"cexs": [_model_json(c) for c in cfg.cexs], "phis": [formula_sexp(f) for f in cfg.phis]}


def digest(cfg: PdrConfig) -> str:
    return hashlib.sha256(json.dumps(config_json(cfg), sort_keys=True).encode()).hexdigest()[:16]


@dataclass
class TransitionLog:
    """Records ``(step, rule, digest)`` plus the configuration after each step."""

    engine: str
    records: list[dict] = field(default_factory=list)

    def add(self, rule: str, cfg: PdrConfig, **extra):
        rec = {"step": len(self.records), "rule": rule, "digest": digest(cfg), "config": config_json(cfg)}
        rec.update(extra)
        self.records.append(rec)

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.records)

    @classmethod
    def from_jsonl(cls, engine: str, text: str) -> TransitionLog:
        return cls(engine, [json.loads(line) for line in text.splitlines() if line.strip()])


def read_config(ts: TransitionSystem, rec: dict) -> PdrConfig:
    env = {str(v): v for v in ts.state_vars}
    reader = FormulaReader(env)
    cexs = tuple(Model({env[k]: Fraction(v) for k, v in c.items()}) for c in rec["config"]["cexs"])
    phis = tuple(reader.formula(parse_sexp(s)) for s in rec["config"]["phis"])
    return PdrConfig(cexs, phis)


@dataclass(frozen=True)
class BisimResult:
    ok: bool
    step: int | None = None
    reason: str = ""
    inconclusive: bool = False


def related(session: SolverSession, ind: PdrConfig, sp: PdrConfig) -> str | None:
    """Why ``ind`` and ``sp`` are not related by ``F_j <=> phi_0 | ... | phi_j``."""
    if ind.cexs != sp.cexs:
        return "counterexample sequences differ"
    if ind.n != sp.n:
        return f"lengths differ ({ind.n} vs {sp.n})"
    for j, (f, g) in enumerate(zip(sp.phis, frames(ind.phis))):
        if not session.entails(f, g):
            return f"F_{j} does not entail the disjunction of phi_0..phi_{j}"
        if not session.entails(g, f):
            return f"the disjunction of phi_0..phi_{j} does not entail F_{j}"
    return None


def bisim_check(ts: TransitionSystem, log_ind: TransitionLog, log_spdr: TransitionLog,
                session: SolverSession) -> BisimResult:
    """Replay two logs side by side; the first step where the relation fails, if any."""
    for i, (a, b) in enumerate(zip(log_ind.records, log_spdr.records)):
        if a["rule"] != b["rule"]:
            return BisimResult(False, i, f"rules differ: {a['rule']} vs {b['rule']}")
        try:
            why = related(session, read_config(ts, a), read_config(ts, b))
        except BackendUnknown as exc:
            return BisimResult(False, i, f"backend unknown: {exc}", inconclusive=True)
        if why is not None:
            return BisimResult(False, i, f"{a['rule']}: {why}")
    if len(log_ind.records) != len(log_spdr.records):
        return BisimResult(False, min(len(log_ind.records), len(log_spdr.records)), "logs have different lengths")
    return BisimResult(True)


# --------------------------------------------------------------------------
# runs


@dataclass
class LockstepResult:
    logs: dict
    violations: list[str]
    outcome: Outcome | None
    steps: int


def lockstep(ts: TransitionSystem, session: SolverSession, leader: str = "indpdr", max_steps: int = 200,
             models: ModelStream | None = None, strength: str = "generalized",
             perturb: Callable[[Step], Step] | None = None, check_invariants: bool = True) -> LockstepResult:
    """Run both engines on the leader's choices.

    ``perturb`` (a negative control) rewrites the Conflict steps given to
    the follower; the rewritten step is applied even when illegal so that
    the logs show the divergence.
    """
    models = models or ModelStream()
    lead = SYSTEMS[leader](ts, session)
    follow = SYSTEMS["spdr" if leader == "indpdr" else "indpdr"](ts, session)
    cfg = {lead.name: lead.initial(), follow.name: follow.initial()}
    logs = {name: TransitionLog(name) for name in cfg}
    for name, c in cfg.items():
        logs[name].add("Init", c)
    violations: list[str] = []
    outcome = None
    steps = 0
    while steps < max_steps:
        step = choose(ts, session, lead, cfg[lead.name], models, strength)
        if isinstance(step, Outcome):
            outcome = step
            if step.kind == "SAFE":
                other = follow.safe_level(cfg[follow.name])
                if other is None:
                    violations.append(f"step {steps}: {follow.name} has no closed level")
            break
        steps += 1
        for sys_ in (lead, follow):
            st = step
            if sys_ is follow and perturb is not None and step.rule == "Conflict":
                st = perturb(step)
            why = sys_.illegal(cfg[sys_.name], st)
            if why is not None:
                violations.append(f"step {steps}: {st.rule} illegal for {sys_.name}: {why}")
            cfg[sys_.name] = sys_.apply(cfg[sys_.name], st)
            logs[sys_.name].add(st.rule, cfg[sys_.name])
            if check_invariants:
                violations.extend(f"step {steps}: {sys_.name} {v}" for v in sys_.violations(cfg[sys_.name]))
                fr = sys_.frame_view(cfg[sys_.name])
                for j in range(len(fr) - 1):
                    if not session.entails(fr[j], fr[j + 1]):
                        violations.append(f"step {steps}: {sys_.name} frames not monotone at {j}")
    return LockstepResult(logs, violations, outcome, steps)


def _safe_certificate(ts, session, phis: Sequence[Formula], ell: int, name: str) -> Certificate:
    if ell == 0:
        p = PartialProof(ts)
        apply_axiom(p, p.root, session)
        return replace(extract_certificate(p, session), strategy=name)
    p = PartialProof.from_cut_sequence(ts, list(phis[:ell + 1]))
    leaf = p.chain()[-1]
    if try_link(p, leaf, session) is None:
        raise AssertionError("closed level does not link back")
    return replace(extract_certificate(p, session), strategy=name)


def run_pdr(ts: TransitionSystem, session: SolverSession, engine: str = "spdr",
            budget: Budget = DEFAULT_BUDGET, models: ModelStream | None = None,
            strength: str = "generalized", induction: bool = False,
            log: TransitionLog | None = None) -> Certificate:
    """Run one engine alone under the shared policy and turn the outcome into a certificate."""
    models = models or ModelStream()
    sys_ = SYSTEMS[engine](ts, session)
    cfg = sys_.initial()
    recover = engine == "spdr"
    if log is not None:
        log.add("Init", cfg)
    stats = {"steps": 0, "conflicts": 0}
    try:
        for _ in range(budget.max_iterations):
            step = choose(ts, session, sys_, cfg, models, strength, recover=recover)
            if isinstance(step, Outcome):
                return _finish(ts, session, sys_, cfg, step, engine, stats)
            if step.rule == "Unfold" and cfg.n >= budget.max_unrollings:
                return Certificate.unknown("unrolling budget exhausted", strategy=engine, stats=stats)
            cfg = sys_.apply(cfg, step)
            stats["steps"] += 1
            stats["conflicts"] += step.rule.startswith("Conflict")
            if log is not None:
                log.add(step.rule, cfg)
            if induction and step.rule == "Conflict" and engine == "spdr":
                k = cfg.k - 1
                for ell in range(cfg.n, k, -1):
                    ind = Step("Induction", psi=step.psi, level=ell)
                    if sys_.illegal(cfg, ind) is None:
                        cfg = sys_.apply(cfg, ind)
                        if log is not None:
                            log.add("Induction", cfg)
                        break
        return Certificate.unknown("iteration budget exhausted", strategy=engine, stats=stats)
    except BackendUnknown as exc:
        return Certificate.unknown(f"backend: {exc}", strategy=engine, stats=stats)


def _finish(ts, session, sys_, cfg, out: Outcome, name: str, stats) -> Certificate:
    if out.kind == "UNSAFE":
        if not replay_trace(ts, out.trace):
            return Certificate.unknown("counterexample chain does not replay", strategy=name, stats=stats)
        return Certificate.unsafe(out.trace, strategy=name, stats=stats)
    if out.kind == "SAFE":
        chain = cfg.phis if sys_.name == "spdr" else frames(cfg.phis)
        return replace(_safe_certificate(ts, session, chain, out.level, name), stats=stats)
    return Certificate.unknown(out.reason, strategy=name, stats=stats)


def spdr(ts: TransitionSystem, session: SolverSession, budget: Budget = DEFAULT_BUDGET,
         models: ModelStream | None = None, strength: str = "generalized",
         induction: bool = False) -> Certificate:
    return run_pdr(ts, session, "spdr", budget, models, strength, induction)


__all__ = [
    "BisimResult", "IndPdrSystem", "LockstepResult", "Outcome", "PdrConfig", "SpdrSystem", "Step",
    "TransitionLog", "bisim_check", "choose", "conflict_formula", "digest", "lockstep", "read_config",
    "related", "run_pdr", "spdr",
]
