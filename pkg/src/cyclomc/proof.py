"""Cyclic proofs of ``init |- nu P`` and the certificates extracted from them.

A proof is a tree of nodes ``phi |- nu P``.  Each node is open or closed by
one of the rules

* SE:      child ``post(phi)``; side condition ``phi |= assertion``
* SE_CUT:  child ``psi``; side conditions ``post(phi) |= psi`` and ``phi |= assertion``
* CUT:     child ``psi``; side condition ``phi |= psi``
* OR_L:    one child per disjunct of ``phi``
* LINK:    back edge to an ancestor with the same left-hand side
* AXIOM:   ``phi`` unsatisfiable

A closed proof is sound when every side condition holds and every link
segment (ancestor to bud) passes through an SE or SE_CUT node.
"""

from __future__ import annotations

import copy
import enum
from collections.abc import Sequence
from dataclasses import dataclass, field

from cyclomc.backend import Entailment, SolverSession
from cyclomc.logic import (
    FALSE,
    Formula,
    Model,
    Or,
    TransitionSystem,
    conj,
    disj,
    evaluate,
    neg,
)
from cyclomc.qelim import post_image, simplify


class ProofError(ValueError):
    """The proof does not support the requested conclusion."""


class Rule(enum.Enum):
    OPEN = "open"
    SE = "SE"
    SE_CUT = "SE+Cut"
    CUT = "Cut"
    OR_L = "OrL"
    LINK = "Link"
    AXIOM = "Axiom"


PROGRESSING = (Rule.SE, Rule.SE_CUT)


class Status(enum.Enum):
    UNCHECKED = "unchecked"
    VALID = "valid"
    INVALID = "invalid"
    UNKNOWN = "unknown"


@dataclass
class SideCondition:
    lhs: Formula
    rhs: Formula
    label: str
    status: Status = Status.UNCHECKED
    model: Model | None = None

    def check(self, session: SolverSession) -> Status:
        r = session.check_entailment(self.lhs, self.rhs)
        self.status = {Entailment.VALID: Status.VALID, Entailment.INVALID: Status.INVALID,
                       Entailment.UNKNOWN: Status.UNKNOWN}[r.status]
        self.model = r.model
        return self.status


@dataclass
class ProofNode:
    id: int
    lhs: Formula
    parent: int | None = None
    rule: Rule = Rule.OPEN
    children: list[int] = field(default_factory=list)
    side: list[SideCondition] = field(default_factory=list)
    cut: Formula | None = None
    target: int | None = None
    depth: int = 0

    def __str__(self) -> str:
        return f"#{self.id} [{self.rule.value}] {self.lhs} |- nu P"


class PartialProof:
    """A proof tree under construction for a fixed transition system."""

    def __init__(self, ts: TransitionSystem):
        self.ts = ts
        self.nodes: dict[int, ProofNode] = {}
        self._next = 0
        self.root = self._new(ts.init, None)

    def _new(self, lhs: Formula, parent: int | None) -> int:
        nid = self._next
        self._next += 1
        depth = 0 if parent is None else self.nodes[parent].depth + 1
        self.nodes[nid] = ProofNode(nid, lhs, parent, depth=depth)
        if parent is not None:
            self.nodes[parent].children.append(nid)
        return nid

    def copy(self) -> PartialProof:
        return copy.deepcopy(self)

    def __getitem__(self, nid: int) -> ProofNode:
        return self.nodes[nid]

    def __len__(self) -> int:
        return len(self.nodes)

    # queries

    def open_leaves(self) -> list[int]:
        return sorted(n.id for n in self.nodes.values() if n.rule is Rule.OPEN)

    def is_closed(self) -> bool:
        return not self.open_leaves()

    def path(self, nid: int) -> list[int]:
        """Node ids from the root down to ``nid``."""
        out = []
        cur = nid
        while cur is not None:
            out.append(cur)
            cur = self.nodes[cur].parent
        return out[::-1]

    def side_conditions(self):
        for n in self.nodes.values():
            yield from ((n, sc) for sc in n.side)

    def check_side_conditions(self, session: SolverSession, recheck: bool = False) -> bool:
        """Check pending side conditions; True when all of them are valid."""
        ok = True
        for _, sc in self.side_conditions():
            if recheck or sc.status is Status.UNCHECKED:
                sc.check(session)
            ok = ok and sc.status is Status.VALID
        return ok

    def is_valid(self) -> bool:
        return all(sc.status is Status.VALID for _, sc in self.side_conditions())

    def links(self) -> list[ProofNode]:
        return [n for n in self.nodes.values() if n.rule is Rule.LINK]

    def chain(self) -> list[int]:
        """Follow single SE/SE_CUT children from the root."""
        out = [self.root]
        while True:
            n = self.nodes[out[-1]]
            if n.rule in PROGRESSING and len(n.children) == 1:
                out.append(n.children[0])
            else:
                return out

    def cut_sequence(self) -> list[Formula]:
        return [self.nodes[i].lhs for i in self.chain()]

    # mutation

    def reopen(self, nid: int):
        """Drop the subtree below ``nid`` and make it an open leaf again."""
        doomed = set()
        stack = list(self.nodes[nid].children)
        while stack:
            c = stack.pop()
            doomed.add(c)
            stack.extend(self.nodes[c].children)
        for c in doomed:
            del self.nodes[c]
        n = self.nodes[nid]
        n.children = []
        n.rule = Rule.OPEN
        n.side = []
        n.cut = None
        n.target = None
        for m in list(self.nodes.values()):
            if m.id in self.nodes and m.rule is Rule.LINK and m.target in doomed:
                self.reopen(m.id)

    def set_lhs(self, nid: int, lhs: Formula):
        """Replace a node's formula and invalidate the side conditions that mention it."""
        n = self.nodes[nid]
        n.lhs = lhs
        for sc in n.side:
            sc.status = Status.UNCHECKED
        if n.parent is not None:
            p = self.nodes[n.parent]
            if p.rule is Rule.SE_CUT:
                p.cut = lhs
                p.side[0] = SideCondition(self.ts.image_formula(p.lhs), lhs, "post |= cut")
            for sc in p.side:
                sc.status = Status.UNCHECKED
        self._refresh_side(nid)

    def _refresh_side(self, nid: int):
        n = self.nodes[nid]
        a = self.ts.assertion
        if n.rule is Rule.SE:
            n.side = [SideCondition(n.lhs, a, "phi |= assertion")]
        elif n.rule is Rule.SE_CUT:
            n.side = [SideCondition(self.ts.image_formula(n.lhs), n.cut, "post |= cut"),
                      SideCondition(n.lhs, a, "phi |= assertion")]
        elif n.rule is Rule.CUT:
            n.side = [SideCondition(n.lhs, n.cut, "phi |= lemma")]
        elif n.rule is Rule.AXIOM:
            n.side = [SideCondition(n.lhs, FALSE, "phi |= false")]
        elif n.rule is Rule.OR_L:
            n.side = [SideCondition(n.lhs, disj(*(self.nodes[c].lhs for c in n.children)), "split")]

    def _close(self, nid: int, rule: Rule, cut: Formula | None = None):
        n = self.nodes[nid]
        if n.rule is not Rule.OPEN:
            raise ProofError(f"node {nid} is not an open leaf")
        n.rule = rule
        n.cut = cut
        self._refresh_side(nid)

    @classmethod
    def from_cut_sequence(cls, ts: TransitionSystem, phis: Sequence[Formula]) -> PartialProof:
        """Chain ``phi_0 -> ... -> phi_n`` of SE+Cut steps with an open last node."""
        p = cls(ts)
        if phis[0] != ts.init:
            p.nodes[p.root].lhs = phis[0]
        cur = p.root
        for phi in phis[1:]:
            p._close(cur, Rule.SE_CUT, phi)
            cur = p._new(phi, cur)
        return p


# --------------------------------------------------------------------------
# rule applications


def _check(p: PartialProof, nid: int, session: SolverSession | None):
    if session is not None:
        for sc in p.nodes[nid].side:
            sc.check(session)


def apply_se(p: PartialProof, leaf: int, session: SolverSession | None = None) -> int:
    """Symbolic execution: the child is the exact image of the leaf."""
    p._close(leaf, Rule.SE)
    _check(p, leaf, session)
    return p._new(simplify(post_image(p.ts, p.nodes[leaf].lhs)), leaf)


def apply_se_cut(p: PartialProof, leaf: int, cut: Formula, session: SolverSession | None = None) -> int:
    """Symbolic execution followed by a cut to ``cut``."""
    p._close(leaf, Rule.SE_CUT, cut)
    _check(p, leaf, session)
    return p._new(cut, leaf)


def apply_cut(p: PartialProof, leaf: int, lemma: Formula, session: SolverSession | None = None) -> int:
    p._close(leaf, Rule.CUT, lemma)
    _check(p, leaf, session)
    return p._new(lemma, leaf)


def apply_axiom(p: PartialProof, leaf: int, session: SolverSession | None = None):
    p._close(leaf, Rule.AXIOM)
    _check(p, leaf, session)


def link(p: PartialProof, bud: int, target: int):
    """Close ``bud`` by a back edge to ``target`` (no checks)."""
    n = p.nodes[bud]
    if n.rule is not Rule.OPEN:
        raise ProofError(f"node {bud} is not an open leaf")
    n.rule = Rule.LINK
    n.target = target
    n.side = []


def _progresses(p: PartialProof, target: int, bud: int) -> bool:
    path = p.path(bud)
    if target not in path:
        return False
    seg = path[path.index(target):-1]
    return any(p.nodes[i].rule in PROGRESSING for i in seg)


def try_link(p: PartialProof, leaf: int, session: SolverSession) -> int | None:
    """Close ``leaf`` by Cut + Link to an ancestor whose formula it entails.

    Only ancestors whose link would satisfy the trace condition are tried,
    nearest to the root first.  Returns the target id or None.
    """
    phi = p.nodes[leaf].lhs
    for anc in p.path(leaf)[:-1]:
        psi = p.nodes[anc].lhs
        if p.nodes[anc].rule not in PROGRESSING:
            continue
        r = session.check_entailment(phi, psi)
        if r.status is not Entailment.VALID:
            continue
        if phi == psi:
            link(p, leaf, anc)
        else:
            bud = apply_cut(p, leaf, psi, session)
            link(p, bud, anc)
        return anc
    return None


def close_by_disjunction(p: PartialProof, leaf: int, targets: Sequence[int],
                         session: SolverSession | None = None) -> bool:
    """Cut to the disjunction of the targets' formulas, split, and link each branch."""
    uniq, seen = [], set()
    for t in targets:
        f = p.nodes[t].lhs
        if f == FALSE or f in seen:
            continue
        seen.add(f)
        uniq.append(t)
    if not uniq:
        apply_axiom(p, leaf, session)
        return p.is_valid()
    if len(uniq) == 1:
        bud = apply_cut(p, leaf, p.nodes[uniq[0]].lhs, session)
        link(p, bud, uniq[0])
        return p.is_valid()
    psi = Or([p.nodes[t].lhs for t in uniq])
    mid = apply_cut(p, leaf, psi, session)
    p._close(mid, Rule.OR_L)
    for t in uniq:
        link(p, p._new(p.nodes[t].lhs, mid), t)
    p._refresh_side(mid)
    _check(p, mid, session)
    return p.is_valid()


def check_global_trace(p: PartialProof) -> list[int]:
    """Link nodes whose segment has no SE/SE_CUT step (empty list: condition holds)."""
    return [n.id for n in p.links() if not _progresses(p, n.target, n.id)]


# --------------------------------------------------------------------------
# certificates


class Verdict(enum.Enum):
    SAFE = "SAFE"
    UNSAFE = "UNSAFE"
    BOUNDED_SAFE = "BOUNDED_SAFE"
    UNKNOWN = "UNKNOWN"

    @property
    def exit_code(self) -> int:
        return {"SAFE": 0, "BOUNDED_SAFE": 0, "UNSAFE": 1, "UNKNOWN": 2}[self.value]


@dataclass(frozen=True)
class Certificate:
    verdict: Verdict
    invariant: Formula | None = None
    proof: PartialProof | None = None
    trace: tuple[Model, ...] | None = None
    bound: int | None = None
    reason: str = ""
    strategy: str = ""
    stats: dict = field(default_factory=dict, compare=False)

    @classmethod
    def safe(cls, invariant, proof=None, **kw):
        return cls(Verdict.SAFE, invariant=invariant, proof=proof, **kw)

    @classmethod
    def unsafe(cls, trace, **kw):
        return cls(Verdict.UNSAFE, trace=tuple(trace), **kw)

    @classmethod
    def bounded_safe(cls, bound, proof=None, **kw):
        return cls(Verdict.BOUNDED_SAFE, bound=bound, proof=proof, **kw)

    @classmethod
    def unknown(cls, reason, **kw):
        return cls(Verdict.UNKNOWN, reason=reason, **kw)

    def summary(self) -> str:
        if self.verdict is Verdict.SAFE:
            return f"SAFE invariant: {self.invariant}"
        if self.verdict is Verdict.UNSAFE:
            return "UNSAFE trace: " + " -> ".join(map(str, self.trace))
        if self.verdict is Verdict.BOUNDED_SAFE:
            return f"BOUNDED_SAFE up to {self.bound} steps"
        return f"UNKNOWN ({self.reason})"


def invariant_violations(ts: TransitionSystem, inv: Formula, session: SolverSession) -> list[str]:
    """Which of ``init |= inv``, ``post(inv) |= inv``, ``inv |= assertion`` fail."""
    out = []
    checks = (("init |= inv", ts.init, inv),
              ("post(inv) |= inv", ts.image_formula(inv), inv),
              ("inv |= assertion", inv, ts.assertion))
    for label, a, b in checks:
        r = session.check_entailment(a, b)
        if not r.valid:
            out.append(f"{label}: {r.status.value}")
    return out


def replay_trace(ts: TransitionSystem, trace: Sequence[Model]) -> bool:
    """Does ``trace`` start in init, follow trans and end outside the assertion?"""
    if not trace:
        return False
    sv = ts.state_vars
    try:
        if not evaluate(ts.init, trace[0]):
            return False
        for a, b in zip(trace, trace[1:]):
            m = dict(a.restrict(sv))
            m.update({v.primed(): b[v] for v in sv})
            if not evaluate(ts.trans, m):
                return False
        return not evaluate(ts.assertion, trace[-1])
    except KeyError:
        return False


def extract_certificate(p: PartialProof, session: SolverSession) -> Certificate:
    """Safe (closed proof) or BoundedSafe (open leaves) certificate, re-verified."""
    p.check_side_conditions(session)
    bad = [sc.label for _, sc in p.side_conditions() if sc.status is not Status.VALID]
    if bad:
        raise ProofError(f"side conditions not valid: {bad}")
    loops = check_global_trace(p)
    if loops:
        raise ProofError(f"links {loops} violate the global trace condition")
    opened = p.open_leaves()
    if opened:
        bound = min(p.nodes[i].depth for i in opened) - 1
        return Certificate.bounded_safe(bound, p)
    inv = simplify(disj(*(n.lhs for n in p.nodes.values())))
    problems = invariant_violations(p.ts, inv, session)
    if problems:
        raise ProofError(f"extracted invariant fails: {problems}")
    return Certificate.safe(inv, p)


# --------------------------------------------------------------------------
# cut sequences


@dataclass(frozen=True)
class CutSequence:
    """``phi_0 = init, phi_1, ..., phi_n`` read off a chain of SE+Cut steps."""

    phis: tuple[Formula, ...]

    def __post_init__(self):
        object.__setattr__(self, "phis", tuple(self.phis))

    @property
    def n(self) -> int:
        return len(self.phis) - 1

    def __len__(self):
        return len(self.phis)

    def __getitem__(self, i):
        return self.phis[i]


def cut_sequence_violations(ts: TransitionSystem, phis: Sequence[Formula], session: SolverSession,
                            assertion: Formula | None = None) -> list[str]:
    """Input conditions of a refinement problem that ``phis`` breaks."""
    a = ts.assertion if assertion is None else assertion
    out = []
    if not session.equivalent(phis[0], ts.init):
        out.append("phi_0 is not init")
    for i in range(len(phis) - 1):
        if not session.entails(phis[i], a):
            out.append(f"phi_{i} does not entail the assertion")
        if not session.entails(ts.image_formula(phis[i]), phis[i + 1]):
            out.append(f"post(phi_{i}) does not entail phi_{i + 1}")
    return out


def refinement_violations(ts: TransitionSystem, phis: Sequence[Formula], refined: Sequence[Formula],
                          session: SolverSession, assertion: Formula | None = None) -> list[str]:
    """Which refinement constraints ``refined`` violates relative to ``phis``."""
    a = ts.assertion if assertion is None else assertion
    out = []
    if len(refined) != len(phis):
        return [f"length {len(refined)} != {len(phis)}"]
    if not session.equivalent(refined[0], ts.init):
        out.append("phi'_0 is not init")
    for i, (old, new) in enumerate(zip(phis, refined)):
        if not session.entails(new, old):
            out.append(f"phi'_{i} does not entail phi_{i}")
        if i + 1 < len(refined) and not session.entails(ts.image_formula(new), refined[i + 1]):
            out.append(f"post(phi'_{i}) does not entail phi'_{i + 1}")
    if not session.entails(refined[-1], a):
        out.append("phi'_n does not entail the assertion")
    return out


def conservativity_level(phis: Sequence[Formula], refined: Sequence[Formula], session: SolverSession) -> int:
    """Largest k with ``refined[j]`` equivalent to ``phis[j]`` for all j <= k (-1 if none)."""
    k = -1
    for old, new in zip(phis, refined):
        if old != new and not session.equivalent(old, new):
            break
        k += 1
    return k


# --------------------------------------------------------------------------
# rendering


def export_dot(p: PartialProof) -> str:
    """Graphviz rendering; invalid side conditions are drawn in red."""
    def esc(s):
        return str(s).replace("\\", "\\\\").replace('"', '\\"')

    lines = ["digraph proof {", "  node [shape=box, fontname=monospace];"]
    for n in sorted(p.nodes.values(), key=lambda n: n.id):
        lines.append(f'  n{n.id} [label="{esc(n.rule.value)}: {esc(n.lhs)} |- nu P"];')
        for k, sc in enumerate(n.side):
            color = {"valid": "darkgreen", "invalid": "red", "unknown": "orange"}.get(sc.status.value, "gray")
            lines.append(f'  s{n.id}_{k} [shape=note, color={color}, '
                         f'label="{esc(sc.label)}\\n{esc(sc.lhs)} |= {esc(sc.rhs)}"];')
            lines.append(f"  n{n.id} -> s{n.id}_{k} [style=dotted, arrowhead=none];")
        for c in n.children:
            lines.append(f"  n{n.id} -> n{c};")
        if n.rule is Rule.LINK:
            lines.append(f"  n{n.id} -> n{n.target} [style=dashed, constraint=false];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def bounded_unroll_formula(ts: TransitionSystem, k: int) -> Formula:
    """``init(x@0) & trans_0 & ... & trans_{k-1} & !assertion(x@k)``."""
    parts = [ts.at(ts.init, 0)]
    parts.extend(ts.trans_at(i) for i in range(k))
    parts.append(ts.at(neg(ts.assertion), k))
    return conj(*parts)
