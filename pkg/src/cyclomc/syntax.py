"""S-expression reading and printing for formulas.

The same printer produces SMT-LIB2 (for external solvers) and the native
problem syntax; the only difference is whether symbols are always quoted.
"""

from __future__ import annotations

from collections.abc import Mapping
from fractions import Fraction

from cyclomc.logic import (
    FALSE,
    TRUE,
    And,
    Atom,
    Exists,
    Forall,
    Formula,
    Implies,
    LinExpr,
    NonlinearError,
    Not,
    Or,
    Sort,
    Var,
    conj,
    disj,
    exists,
    forall,
    implies,
    mk_atom,
    neg,
)


class SyntaxErrorS(ValueError):
    """Malformed s-expression input; ``line``/``col`` are 1-based when known."""

    def __init__(self, msg: str, line: int | None = None, col: int | None = None):
        where = f"{line}:{col}: " if line is not None else ""
        super().__init__(where + msg)
        self.line = line
        self.col = col


Sexp = "str | list[Sexp]"


def _position(text: str, offset: int) -> tuple[int, int]:
    line = text.count("\n", 0, offset) + 1
    col = offset - (text.rfind("\n", 0, offset) + 1) + 1
    return line, col


def _tokens(text: str) -> list[tuple[str, int]]:
    toks = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif ch in "()":
            toks.append((ch, i))
            i += 1
        elif ch == "|":
            j = text.find("|", i + 1)
            if j < 0:
                raise SyntaxErrorS("unterminated |symbol|", *_position(text, i))
            toks.append((text[i:j + 1], i))
            i = j + 1
        elif ch == '"':
            j = i + 1
            while j < n and not (text[j] == '"' and (j + 1 >= n or text[j + 1] != '"')):
                j += 2 if text[j] == '"' else 1
            if j >= n:
                raise SyntaxErrorS("unterminated string", *_position(text, i))
            toks.append((text[i:j + 1], i))
            i = j + 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in '();"':
                j += 1
            toks.append((text[i:j], i))
            i = j
    return toks


def tokenize(text: str) -> list[str]:
    return [t for t, _ in _tokens(text)]


def parse_sexps(text: str) -> list:
    toks = _tokens(text)
    out = []
    pos = 0

    def read(p):
        tok, off = toks[p]
        if tok == "(":
            lst = []
            p += 1
            while True:
                if p >= len(toks):
                    raise SyntaxErrorS("unbalanced parentheses", *_position(text, off))
                if toks[p][0] == ")":
                    return lst, p + 1
                item, p = read(p)
                lst.append(item)
        if tok == ")":
            raise SyntaxErrorS("unexpected ')'", *_position(text, off))
        return tok, p + 1

    while pos < len(toks):
        item, pos = read(pos)
        out.append(item)
    return out


def parse_sexp(text: str):
    items = parse_sexps(text)
    if len(items) != 1:
        raise SyntaxErrorS(f"expected one s-expression, got {len(items)}")
    return items[0]


def unquote(sym: str) -> str:
    if len(sym) >= 2 and sym[0] == "|" and sym[-1] == "|":
        return sym[1:-1]
    return sym


# --------------------------------------------------------------------------
# printing


_SIMPLE_EXTRA = set("~!@$%^&*_-+=<>.?/'")


def _is_simple(name: str) -> bool:
    return bool(name) and not name[0].isdigit() and all(c.isalnum() or c in _SIMPLE_EXTRA for c in name)


def symbol(v: Var | str, quote_all: bool = False) -> str:
    name = str(v)
    if quote_all or not _is_simple(name):
        return f"|{name}|"
    return name


def number(q, real: bool) -> str:
    q = Fraction(q)
    if q.denominator != 1:
        s = f"(/ {number(abs(q.numerator), real)} {number(q.denominator, real)})"
        return f"(- {s})" if q < 0 else s
    k = q.numerator
    body = f"{abs(k)}.0" if real else str(abs(k))
    return f"(- {body})" if k < 0 else body


def term_sexp(e: LinExpr, quote_all: bool = False, real: bool | None = None) -> str:
    if real is None:
        real = e.sort is Sort.REAL
    parts = []
    for v, c in e.coeffs:
        s = symbol(v, quote_all)
        if real and v.sort is Sort.INT:
            s = f"(to_real {s})"
        parts.append(s if c == 1 else f"(* {number(c, real)} {s})")
    if e.const != 0 or not parts:
        parts.append(number(e.const, real))
    return parts[0] if len(parts) == 1 else "(+ " + " ".join(parts) + ")"


def _atom_sexp(a: Atom, quote_all: bool) -> str:
    real = not a.is_int
    op, lhs, bound = a.op, a.lhs, a.bound
    if op in ("<=", "<") and all(c < 0 for _, c in lhs.coeffs):
        op, lhs, bound = (">=" if op == "<=" else ">"), -lhs, -bound
    body = f"{term_sexp(lhs, quote_all, real)} {number(bound, real)}"
    if op == "!=":
        return f"(not (= {body}))"
    return f"({op} {body})"


def formula_sexp(f: Formula, quote_all: bool = False) -> str:
    if f == TRUE:
        return "true"
    if f == FALSE:
        return "false"
    if isinstance(f, Atom):
        return _atom_sexp(f, quote_all)
    if isinstance(f, Not):
        return f"(not {formula_sexp(f.arg, quote_all)})"
    if isinstance(f, And):
        return "(and " + " ".join(formula_sexp(a, quote_all) for a in f.args) + ")"
    if isinstance(f, Or):
        return "(or " + " ".join(formula_sexp(a, quote_all) for a in f.args) + ")"
    if isinstance(f, Implies):
        return f"(=> {formula_sexp(f.lhs, quote_all)} {formula_sexp(f.rhs, quote_all)})"
    if isinstance(f, (Exists, Forall)):
        word = "exists" if isinstance(f, Exists) else "forall"
        binds = " ".join(f"({symbol(v, quote_all)} {v.sort})" for v in f.vars)
        return f"({word} ({binds}) {formula_sexp(f.body, quote_all)})"
    raise TypeError(f"not a formula: {f!r}")


# --------------------------------------------------------------------------
# reading formulas


def _num(tok: str) -> Fraction | None:
    try:
        return Fraction(tok)
    except (ValueError, ZeroDivisionError):
        return None


class FormulaReader:
    """Reads formulas over a fixed set of variables given by name."""

    def __init__(self, env: Mapping[str, Var]):
        self.env = dict(env)

    def formula(self, s) -> Formula:
        r = self._expr(s, {})
        if not isinstance(r, Formula):
            raise SyntaxErrorS(f"expected a formula, got a term: {s}")
        return r

    def term(self, s) -> LinExpr:
        r = self._expr(s, {})
        if not isinstance(r, LinExpr):
            raise SyntaxErrorS(f"expected a term: {s}")
        return r

    def _lookup(self, tok: str, local):
        name = unquote(tok)
        if name in local:
            return local[name]
        if name in self.env:
            return LinExpr.of(self.env[name])
        if tok == "true":
            return TRUE
        if tok == "false":
            return FALSE
        q = _num(tok)
        if q is not None:
            return LinExpr((), q)
        raise SyntaxErrorS(f"unknown symbol {name!r}")

    def _expr(self, s, local):
        if isinstance(s, str):
            return self._lookup(s, local)
        if not s:
            raise SyntaxErrorS("empty application")
        head = s[0]
        if not isinstance(head, str):
            raise SyntaxErrorS(f"bad head {head}")
        args = s[1:]
        if head == "let":
            scope = dict(local)
            for binding in args[0]:
                scope[unquote(binding[0])] = self._expr(binding[1], local)
            return self._expr(args[1], scope)
        if head in ("exists", "forall"):
            scope = dict(local)
            bound = []
            for name, sort in args[0]:
                v = Var(unquote(name), Sort(sort))
                bound.append(v)
                scope[unquote(name)] = LinExpr.of(v)
            body = self._as_formula(self._expr(args[1], scope))
            return exists(bound, body) if head == "exists" else forall(bound, body)
        vals = [self._expr(a, local) for a in args]
        if head == "and":
            return conj(*map(self._as_formula, vals))
        if head == "or":
            return disj(*map(self._as_formula, vals))
        if head == "not":
            return neg(self._as_formula(vals[0]))
        if head == "=>":
            out = self._as_formula(vals[-1])
            for v in reversed(vals[:-1]):
                out = implies(self._as_formula(v), out)
            return out
        if head in ("=", "<=", "<", ">=", ">", "distinct"):
            if head == "=" and all(isinstance(v, Formula) for v in vals):
                a, b = vals
                return conj(implies(a, b), implies(b, a))
            ts = [self._as_term(v) for v in vals]
            if head == "distinct":
                return conj(*(mk_atom("!=", ts[i], ts[j]) for i in range(len(ts)) for j in range(i + 1, len(ts))))
            return conj(*(mk_atom(head, ts[i], ts[i + 1]) for i in range(len(ts) - 1)))
        if head == "+":
            out = LinExpr()
            for v in vals:
                out = out + self._as_term(v)
            return out
        if head == "-":
            ts = [self._as_term(v) for v in vals]
            if len(ts) == 1:
                return -ts[0]
            out = ts[0]
            for t in ts[1:]:
                out = out - t
            return out
        if head == "*":
            out = LinExpr((), 1)
            for v in vals:
                out = out * self._as_term(v)
            return out
        if head == "/":
            ts = [self._as_term(v) for v in vals]
            out = ts[0]
            for t in ts[1:]:
                if not t.is_const:
                    raise NonlinearError("division by a non-constant")
                out = out / t.const
            return out
        if head in ("to_real", "to_int"):
            if head == "to_int":
                raise SyntaxErrorS("to_int is not linear arithmetic")
            return self._as_term(vals[0])
        raise SyntaxErrorS(f"unsupported operator {head!r}")

    @staticmethod
    def _as_formula(v) -> Formula:
        if not isinstance(v, Formula):
            raise SyntaxErrorS(f"expected a formula, got term {v}")
        return v

    @staticmethod
    def _as_term(v) -> LinExpr:
        if not isinstance(v, LinExpr):
            raise SyntaxErrorS(f"expected a term, got formula {v}")
        return v


def value_of(s) -> Fraction:
    """Numeric value of a model entry: 3, 1.5, (- 2), (/ 1 3), (- (/ 1 3)) ..."""
    if isinstance(s, str):
        q = _num(s)
        if q is None:
            raise SyntaxErrorS(f"not a numeral: {s}")
        return q
    head, *args = s
    if head == "-":
        return -value_of(args[0]) if len(args) == 1 else value_of(args[0]) - value_of(args[1])
    if head == "/":
        return value_of(args[0]) / value_of(args[1])
    if head in ("to_real", "to_int"):
        return value_of(args[0])
    raise SyntaxErrorS(f"not a numeral: {s}")
