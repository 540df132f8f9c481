"""Problem files: the native s-expression format and a single-predicate HORN subset.

Native format::

    (vars (x Int) (y Real))
    (init (= x 0))
    (trans (or (= x' (+ x 1)) (= x' (- 1 (* 2 x)))))
    (assert (<= x 2))
    (expect unsafe)          ; optional

HORN input must declare exactly one uninterpreted predicate and use only
linear clauses (at most one predicate application in each body).
"""

from __future__ import annotations

from dataclasses import dataclass

from cyclomc.logic import (
    Formula,
    LogicError,
    Sort,
    TransitionSystem,
    Var,
    conj,
    disj,
    is_quantifier_free,
    mk_atom,
    neg,
)
from cyclomc.qelim import eliminate_quantifiers, qe_exists
from cyclomc.syntax import FormulaReader, SyntaxErrorS, formula_sexp, parse_sexps, symbol, unquote

EXPECT = ("safe", "unsafe")


class ProblemError(ValueError):
    """The input is well-formed s-expressions but not a supported problem."""


@dataclass(frozen=True)
class Problem:
    ts: TransitionSystem
    name: str = ""
    expect: str | None = None


def _sort(tok) -> Sort:
    try:
        return Sort(tok)
    except ValueError:
        raise ProblemError(f"unsupported sort {tok!r} (only Int and Real)") from None


def _closed(f: Formula) -> Formula:
    return f if is_quantifier_free(f) else eliminate_quantifiers(f)


def parse_problem(text: str, name: str = "") -> Problem:
    """Parse either format; HORN is recognised by ``set-logic``/``declare-fun``."""
    items = parse_sexps(text)
    heads = {it[0] for it in items if isinstance(it, list) and it and isinstance(it[0], str)}
    if heads & {"set-logic", "declare-fun", "check-sat", "set-info", "set-option"}:
        return _parse_horn(items, name)
    return _parse_native(items, name)


def _parse_native(items, name: str) -> Problem:
    sections: dict[str, list] = {}
    for it in items:
        if not isinstance(it, list) or not it or not isinstance(it[0], str):
            raise ProblemError(f"expected a (section ...) form, got {it!r}")
        key = it[0]
        if key not in ("vars", "init", "trans", "assert", "expect"):
            raise ProblemError(f"unknown section {key!r}")
        if key in sections:
            raise ProblemError(f"section {key!r} given twice")
        sections[key] = it[1:]
    for key in ("vars", "init", "trans", "assert"):
        if key not in sections:
            raise ProblemError(f"missing section {key!r}")
    state = []
    for decl in sections["vars"]:
        if not (isinstance(decl, list) and len(decl) == 2 and isinstance(decl[0], str)):
            raise ProblemError(f"bad variable declaration {decl!r}")
        v = Var(unquote(decl[0]), _sort(decl[1]))
        if v.name.endswith("'"):
            raise ProblemError(f"variable names may not end in a prime: {v.name}")
        state.append(v)
    if len({v.name for v in state}) != len(state):
        raise ProblemError("duplicate variable names")
    env = {v.name: v for v in state}
    both = dict(env)
    both.update({f"{v.name}'": v.primed() for v in state})

    def one(key, env_):
        body = sections[key]
        if len(body) != 1:
            raise ProblemError(f"section {key!r} takes exactly one formula")
        try:
            return _closed(FormulaReader(env_).formula(body[0]))
        except (SyntaxErrorS, LogicError) as exc:
            raise ProblemError(f"in {key}: {exc}") from exc

    init, trans, assertion = one("init", env), one("trans", both), one("assert", env)
    expect = None
    if "expect" in sections:
        if len(sections["expect"]) != 1 or sections["expect"][0] not in EXPECT:
            raise ProblemError("expect must be 'safe' or 'unsafe'")
        expect = sections["expect"][0]
    try:
        ts = TransitionSystem(tuple(state), init, trans, assertion, name=name)
    except LogicError as exc:
        raise ProblemError(str(exc)) from exc
    return Problem(ts, name, expect)


# --------------------------------------------------------------------------
# HORN


def _parse_horn(items, name: str) -> Problem:
    preds: dict[str, tuple[Sort, ...]] = {}
    clauses = []
    expect = None
    for it in items:
        if not isinstance(it, list) or not it:
            raise ProblemError(f"unexpected {it!r}")
        head = it[0]
        if head == "declare-fun":
            fname, args, ret = unquote(it[1]), it[2], it[3]
            if ret != "Bool":
                raise ProblemError(f"only predicates may be declared ({fname} returns {ret})")
            preds[fname] = tuple(_sort(a) for a in args)
        elif head == "assert":
            clauses.append(it[1])
        elif head == "set-info" and len(it) >= 3 and it[1] == ":status":
            expect = {"sat": "safe", "unsat": "unsafe"}.get(it[2])
        elif head in ("set-logic", "check-sat", "set-info", "set-option", "exit", "get-model"):
            continue
        else:
            raise ProblemError(f"unsupported command {head!r}")
    if len(preds) != 1:
        raise ProblemError(f"expected exactly one predicate, found {len(preds)}: the verifier handles "
                           "a single control state (one invariant predicate) only")
    ((pname, sorts),) = preds.items()
    state = tuple(Var(f"x{i}", s) for i, s in enumerate(sorts))
    inits, transs, bads = [], [], []
    for c in clauses:
        kind, f = _clause(c, pname, state)
        {"init": inits, "trans": transs, "query": bads}[kind].append(f)
    ts = TransitionSystem(state, disj(*inits), disj(*transs), neg(disj(*bads)), name=name)
    return Problem(ts, name, expect)


def _clause(c, pname: str, state: tuple[Var, ...]):
    bound: dict[str, Var] = {}
    body = c
    while isinstance(body, list) and body and body[0] == "forall":
        for vname, s in body[1]:
            bound[unquote(vname)] = Var(f"h!{unquote(vname)}", _sort(s))
        body = body[2]
    if isinstance(body, list) and body and body[0] == "=>":
        lhs, rhs = (["and", *body[1:-1]] if len(body) > 3 else body[1]), body[-1]
    elif isinstance(body, list) and body and body[0] == "not":
        lhs, rhs = body[1], "false"
    else:
        lhs, rhs = "true", body
    reader = FormulaReader({k: v for k, v in bound.items()})

    def apps_and_rest(f):
        conjuncts = f[1:] if isinstance(f, list) and f and f[0] == "and" else [f]
        apps, rest = [], []
        for g in conjuncts:
            if isinstance(g, list) and g and unquote(g[0]) == pname:
                apps.append(g[1:])
            elif isinstance(g, str) and unquote(g) == pname:
                apps.append([])
            else:
                if _mentions(g, pname):
                    raise ProblemError("predicate occurs under a connective other than a top-level conjunction")
                rest.append(g)
        return apps, rest

    b_apps, b_rest = apps_and_rest(lhs)
    if len(b_apps) > 1:
        raise ProblemError("nonlinear clause: more than one predicate application in a body")
    try:
        constraint = conj(*(reader.formula(g) for g in b_rest))
        if isinstance(rhs, list) and rhs and unquote(rhs[0]) == pname:
            head_args = [reader.term(a) for a in rhs[1:]]
        elif rhs == "false":
            head_args = None
        elif _mentions(rhs, pname):
            raise ProblemError("unsupported clause head")
        else:
            # a constraint head: body -> phi is the query body & !phi
            constraint = conj(constraint, neg(reader.formula(rhs)))
            head_args = None
        body_args = [reader.term(a) for a in b_apps[0]] if b_apps else None
    except (SyntaxErrorS, LogicError) as exc:
        raise ProblemError(str(exc)) from exc
    for args in (head_args, body_args):
        if args is not None and len(args) != len(state):
            raise ProblemError("predicate applied to the wrong number of arguments")
    primes = tuple(v.primed() for v in state)
    eqs = []
    if body_args is not None:
        eqs += [mk_atom("=", v, t) for v, t in zip(state, body_args)]
    if head_args is not None:
        target = primes if body_args is not None else state
        eqs += [mk_atom("=", v, t) for v, t in zip(target, head_args)]
    f = conj(constraint, *eqs)
    f = qe_exists(set(bound.values()), _closed(f))
    if head_args is None:
        if body_args is None:
            raise ProblemError("clause without predicate applications")
        return "query", f
    return ("trans", f) if body_args is not None else ("init", f)


def _mentions(s, name: str) -> bool:
    if isinstance(s, str):
        return unquote(s) == name
    return any(_mentions(x, name) for x in s)


# --------------------------------------------------------------------------
# printing


def to_native(p: Problem | TransitionSystem) -> str:
    prob = p if isinstance(p, Problem) else Problem(p)
    ts = prob.ts
    decls = " ".join(f"({symbol(v)} {v.sort})" for v in ts.state_vars)
    lines = [f"(vars {decls})",
             f"(init {formula_sexp(ts.init)})",
             f"(trans {formula_sexp(ts.trans)})",
             f"(assert {formula_sexp(ts.assertion)})"]
    if prob.expect:
        lines.append(f"(expect {prob.expect})")
    return "\n".join(lines) + "\n"


def to_horn(p: Problem | TransitionSystem, pred: str = "Inv") -> str:
    prob = p if isinstance(p, Problem) else Problem(p)
    ts = prob.ts
    xs = list(ts.state_vars)
    ys = [v.primed() for v in xs]

    def binds(vs):
        return " ".join(f"({symbol(v, True)} {v.sort})" for v in vs)

    def app(vs):
        return f"({pred} {' '.join(symbol(v, True) for v in vs)})" if vs else pred

    lines = ["(set-logic HORN)"]
    if prob.expect:
        lines.append(f"(set-info :status {'sat' if prob.expect == 'safe' else 'unsat'})")
    lines.append(f"(declare-fun {pred} ({' '.join(str(v.sort) for v in xs)}) Bool)")
    q = formula_sexp
    lines.append(f"(assert (forall ({binds(xs)}) (=> {q(ts.init, True)} {app(xs)})))")
    lines.append(f"(assert (forall ({binds(xs + ys)}) (=> (and {app(xs)} {q(ts.trans, True)}) {app(ys)})))")
    lines.append(f"(assert (forall ({binds(xs)}) (=> (and {app(xs)} {q(neg(ts.assertion), True)}) false)))")
    lines.append("(check-sat)")
    return "\n".join(lines) + "\n"


__all__ = ["EXPECT", "Problem", "ProblemError", "parse_problem", "to_horn", "to_native"]
