"""Linear arithmetic formulas, terms, models and transition systems.

Everything here is immutable.  Atoms are kept in a canonical normal form
``sum(a_i * v_i) <op> b`` with integer coefficients, ``op`` one of
``=``, ``!=``, ``<=``, ``<``.  Atoms whose variables are all Int-sorted are
additionally tightened (strict bounds become non-strict, coefficients are
divided by their gcd), so syntactic equality of atoms is a useful proxy for
semantic equality over the integers.
"""

from __future__ import annotations

import enum
import itertools
import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Union


class LogicError(Exception):
    pass


class SortError(LogicError):
    pass


class NonlinearError(LogicError):
    pass


class UnboundVariableError(LogicError, KeyError):
    pass


class QuantifierError(LogicError):
    """Raised when a quantified formula reaches an operation that needs QF input."""


class Sort(enum.Enum):
    INT = "Int"
    REAL = "Real"

    def __str__(self) -> str:
        return self.value


PRIME = "'"


@dataclass(frozen=True)
class Var:
    """A variable.  ``index`` is None (current state), PRIME or a step number."""

    name: str
    sort: Sort = Sort.INT
    index: Union[int, str, None] = None

    def __post_init__(self):
        if not self.name or "|" in self.name or "\\" in self.name:
            raise ValueError(f"bad variable name {self.name!r}")
        if self.index is not None and self.index != PRIME and not isinstance(self.index, int):
            raise ValueError(f"bad variable index {self.index!r}")

    def primed(self) -> Var:
        return Var(self.name, self.sort, PRIME)

    def at(self, k: int) -> Var:
        return Var(self.name, self.sort, k)

    def base(self) -> Var:
        return Var(self.name, self.sort, None)

    @property
    def key(self):
        if self.index is None:
            return (self.name, 0, 0)
        if self.index == PRIME:
            return (self.name, 1, 0)
        return (self.name, 2, self.index)

    def __lt__(self, other: Var) -> bool:
        return self.key < other.key

    def __str__(self) -> str:
        if self.index is None:
            return self.name
        if self.index == PRIME:
            return self.name + "'"
        return f"{self.name}@{self.index}"

    def __repr__(self) -> str:
        return f"Var({str(self)}:{self.sort})"

    # arithmetic builds terms; comparison stays structural so Vars hash normally
    def __add__(self, o):
        return LinExpr.of(self) + o

    __radd__ = __add__

    def __sub__(self, o):
        return LinExpr.of(self) - o

    def __rsub__(self, o):
        return LinExpr.of(o) - self

    def __neg__(self):
        return -LinExpr.of(self)

    def __mul__(self, o):
        return LinExpr.of(self) * o

    __rmul__ = __mul__


_fresh_counter = itertools.count()


def fresh_var(v: Var, hint: str = "") -> Var:
    """A variable not produced before by this function (names use ``!``)."""
    return Var(f"{v.name}!{hint}{next(_fresh_counter)}", v.sort, None)


Number = Union[int, Fraction]


def _frac(c) -> Fraction:
    if isinstance(c, Fraction):
        return c
    if isinstance(c, bool):
        raise TypeError("bool is not a number")
    if isinstance(c, int):
        return Fraction(c)
    if isinstance(c, str):
        return Fraction(c)
    raise TypeError(f"not a rational constant: {c!r}")


class LinExpr:
    """Canonical linear term ``sum(c * v) + const`` with rational coefficients."""

    __slots__ = ("coeffs", "const", "_hash")

    def __init__(self, coeffs: Mapping[Var, Fraction] | Iterable = (), const: Number = 0):
        items = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
        acc: dict[Var, Fraction] = {}
        for v, c in items:
            c = _frac(c)
            acc[v] = acc.get(v, Fraction(0)) + c
        self.coeffs = tuple(sorted(((v, c) for v, c in acc.items() if c != 0), key=lambda p: p[0].key))
        self.const = _frac(const)
        self._hash = None

    @staticmethod
    def of(x) -> LinExpr:
        if isinstance(x, LinExpr):
            return x
        if isinstance(x, Var):
            return LinExpr(((x, 1),))
        return LinExpr((), _frac(x))

    @property
    def vars(self) -> frozenset[Var]:
        return frozenset(v for v, _ in self.coeffs)

    def coeff(self, v: Var) -> Fraction:
        for w, c in self.coeffs:
            if w == v:
                return c
        return Fraction(0)

    @property
    def is_const(self) -> bool:
        return not self.coeffs

    @property
    def sort(self) -> Sort:
        if any(v.sort is Sort.REAL for v, _ in self.coeffs):
            return Sort.REAL
        if self.const.denominator != 1 or any(c.denominator != 1 for _, c in self.coeffs):
            return Sort.REAL
        return Sort.INT

    def __eq__(self, other) -> bool:
        return isinstance(other, LinExpr) and self.coeffs == other.coeffs and self.const == other.const

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.coeffs, self.const))
        return self._hash

    def __add__(self, o) -> LinExpr:
        o = LinExpr.of(o)
        return LinExpr(self.coeffs + o.coeffs, self.const + o.const)

    __radd__ = __add__

    def __neg__(self) -> LinExpr:
        return LinExpr(((v, -c) for v, c in self.coeffs), -self.const)

    def __sub__(self, o) -> LinExpr:
        return self + (-LinExpr.of(o))

    def __rsub__(self, o) -> LinExpr:
        return LinExpr.of(o) - self

    def __mul__(self, o) -> LinExpr:
        if isinstance(o, (Var, LinExpr)):
            o = LinExpr.of(o)
            if o.is_const:
                o = o.const
            elif self.is_const:
                return o * self.const
            else:
                raise NonlinearError(f"product of non-constant terms {self} * {o}")
        k = _frac(o)
        return LinExpr(((v, c * k) for v, c in self.coeffs), self.const * k)

    __rmul__ = __mul__

    def __truediv__(self, o) -> LinExpr:
        k = _frac(o)
        if k == 0:
            raise ZeroDivisionError("division of a term by zero")
        return self * (1 / k)

    def evaluate(self, m: Mapping[Var, Fraction]) -> Fraction:
        total = self.const
        for v, c in self.coeffs:
            try:
                total += c * m[v]
            except KeyError:
                raise UnboundVariableError(v) from None
        return total

    def substitute(self, sigma: Mapping[Var, LinExpr]) -> LinExpr:
        res = LinExpr([(v, c) for v, c in self.coeffs if v not in sigma], self.const)
        for v, c in self.coeffs:
            if v in sigma:
                res = res + LinExpr.of(sigma[v]) * c
        return res

    def __str__(self) -> str:
        parts = []
        for v, c in self.coeffs:
            if c == 1:
                parts.append(f"+ {v}")
            elif c == -1:
                parts.append(f"- {v}")
            elif c < 0:
                parts.append(f"- {-c}*{v}")
            else:
                parts.append(f"+ {c}*{v}")
        if self.const or not parts:
            parts.append(f"- {-self.const}" if self.const < 0 else f"+ {self.const}")
        s = " ".join(parts)
        if s.startswith("+ "):
            s = s[2:]
        elif s.startswith("- "):
            s = "-" + s[2:]
        return s

    def __repr__(self) -> str:
        return f"LinExpr({self})"


Term = Union[LinExpr, Var, int, Fraction]


# --------------------------------------------------------------------------
# formulas


class Formula:
    __slots__ = ("_hash", "_fv")

    def __and__(self, o: Formula) -> Formula:
        return conj(self, o)

    def __or__(self, o: Formula) -> Formula:
        return disj(self, o)

    def __invert__(self) -> Formula:
        return neg(self)

    def __rshift__(self, o: Formula) -> Formula:
        return implies(self, o)

    def _key(self):
        raise NotImplementedError

    def __eq__(self, other) -> bool:
        return type(self) is type(other) and self._key() == other._key()

    def __hash__(self) -> int:
        h = self._hash
        if h is None:
            h = hash((type(self).__name__, self._key()))
            object.__setattr__(self, "_hash", h)
        return h

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {self}>"

    @property
    def free_vars(self) -> frozenset[Var]:
        fv = self._fv
        if fv is None:
            fv = self._compute_fv()
            self._fv = fv
        return fv

    def _compute_fv(self) -> frozenset[Var]:
        raise NotImplementedError


class _Const(Formula):
    __slots__ = ("value",)

    def __init__(self, value: bool):
        self.value = value
        self._hash = None
        self._fv = frozenset()

    def _key(self):
        return self.value

    def _compute_fv(self):
        return frozenset()

    def __str__(self) -> str:
        return "true" if self.value else "false"


TRUE = _Const(True)
FALSE = _Const(False)

OPS = ("=", "!=", "<=", "<")


class Atom(Formula):
    """``sum(c * v for v, c in coeffs) <op> bound`` with integer coefficients."""

    __slots__ = ("op", "coeffs", "bound")

    def __init__(self, op: str, coeffs: tuple, bound: int):
        # use mk_atom; this constructor trusts its input
        self.op = op
        self.coeffs = coeffs
        self.bound = bound
        self._hash = None
        self._fv = None

    def _key(self):
        return (self.op, self.coeffs, self.bound)

    def _compute_fv(self):
        return frozenset(v for v, _ in self.coeffs)

    @property
    def lhs(self) -> LinExpr:
        return LinExpr(self.coeffs)

    @property
    def is_int(self) -> bool:
        return all(v.sort is Sort.INT for v, _ in self.coeffs)

    def holds(self, value: Fraction) -> bool:
        """Truth of the atom when its left-hand side evaluates to ``value``."""
        op, b = self.op, self.bound
        if op == "=":
            return value == b
        if op == "!=":
            return value != b
        if op == "<=":
            return value <= b
        return value < b

    def __str__(self) -> str:
        op, coeffs, b = self.op, self.coeffs, self.bound
        if op in ("<=", "<") and all(c < 0 for _, c in coeffs):
            e = LinExpr((v, -c) for v, c in coeffs)
            return f"{e} {'>=' if op == '<=' else '>'} {-b}"
        return f"{LinExpr(coeffs)} {op} {b}"


class Not(Formula):
    __slots__ = ("arg",)

    def __init__(self, arg: Formula):
        self.arg = arg
        self._hash = None
        self._fv = None

    def _key(self):
        return (self.arg,)

    def _compute_fv(self):
        return self.arg.free_vars

    def __str__(self) -> str:
        return f"!{_paren(self.arg)}"


class _NAry(Formula):
    __slots__ = ("args",)
    sym = "?"

    def __init__(self, args: Iterable[Formula]):
        self.args = tuple(args)
        self._hash = None
        self._fv = None

    def _key(self):
        return self.args

    def _compute_fv(self):
        return frozenset().union(*(a.free_vars for a in self.args))

    def __str__(self) -> str:
        return "(" + f" {self.sym} ".join(str(a) for a in self.args) + ")"


class And(_NAry):
    __slots__ = ()
    sym = "&"


class Or(_NAry):
    __slots__ = ()
    sym = "|"


class Implies(Formula):
    __slots__ = ("lhs", "rhs")

    def __init__(self, lhs: Formula, rhs: Formula):
        self.lhs = lhs
        self.rhs = rhs
        self._hash = None
        self._fv = None

    def _key(self):
        return (self.lhs, self.rhs)

    def _compute_fv(self):
        return self.lhs.free_vars | self.rhs.free_vars

    def __str__(self) -> str:
        return f"({self.lhs} => {self.rhs})"


class _Quant(Formula):
    __slots__ = ("vars", "body")
    word = "?"

    def __init__(self, vars: Iterable[Var], body: Formula):
        self.vars = tuple(sorted(set(vars), key=lambda v: v.key))
        self.body = body
        self._hash = None
        self._fv = None

    def _key(self):
        return (self.vars, self.body)

    def _compute_fv(self):
        return self.body.free_vars - frozenset(self.vars)

    def __str__(self) -> str:
        return f"({self.word} {' '.join(map(str, self.vars))}. {self.body})"


class Exists(_Quant):
    __slots__ = ()
    word = "exists"


class Forall(_Quant):
    __slots__ = ()
    word = "forall"


def _paren(f: Formula) -> str:
    s = str(f)
    return s if s.startswith("(") or isinstance(f, _Const) else f"({s})"


# --------------------------------------------------------------------------
# smart constructors


def mk_atom(op: str, lhs: Term, rhs: Term = 0) -> Formula:
    """Normalize ``lhs op rhs`` (op in = != <= < >= >) to an Atom or a constant."""
    e = LinExpr.of(lhs) - LinExpr.of(rhs)
    if op == ">=":
        op, e = "<=", -e
    elif op == ">":
        op, e = "<", -e
    elif op == "==":
        op = "="
    elif op == "distinct":
        op = "!="
    if op not in OPS:
        raise ValueError(f"unknown comparison {op!r}")
    if e.is_const:
        c = e.const
        val = {"=": c == 0, "!=": c != 0, "<=": c <= 0, "<": c < 0}[op]
        return TRUE if val else FALSE
    scale = 1
    for _, c in e.coeffs:
        scale = scale * c.denominator // math.gcd(scale, c.denominator)
    scale = scale * e.const.denominator // math.gcd(scale, e.const.denominator)
    coeffs = [(v, int(c * scale)) for v, c in e.coeffs]
    bound = int(-e.const * scale)
    all_int = all(v.sort is Sort.INT for v, _ in coeffs)
    g = 0
    for _, c in coeffs:
        g = math.gcd(g, c)
    if all_int:
        if op == "<":
            op, bound = "<=", bound - 1
        if op == "<=":
            bound = bound // g  # floor
        elif bound % g:
            return FALSE if op == "=" else TRUE
        else:
            bound //= g
    else:
        g = math.gcd(g, bound)
        bound //= g
    coeffs = [(v, c // g) for v, c in coeffs]
    if op in ("=", "!=") and coeffs[0][1] < 0:
        coeffs = [(v, -c) for v, c in coeffs]
        bound = -bound
    return Atom(op, tuple(coeffs), bound)


def eq(a: Term, b: Term) -> Formula:
    return mk_atom("=", a, b)


def ne(a: Term, b: Term) -> Formula:
    return mk_atom("!=", a, b)


def le(a: Term, b: Term) -> Formula:
    return mk_atom("<=", a, b)


def lt(a: Term, b: Term) -> Formula:
    return mk_atom("<", a, b)


def ge(a: Term, b: Term) -> Formula:
    return mk_atom(">=", a, b)


def gt(a: Term, b: Term) -> Formula:
    return mk_atom(">", a, b)


def _flatten(cls, args):
    out = []
    seen = set()
    for a in args:
        parts = a.args if isinstance(a, cls) else (a,)
        for p in parts:
            if p not in seen:
                seen.add(p)
                out.append(p)
    return out


def conj(*args: Formula) -> Formula:
    if len(args) == 1 and not isinstance(args[0], Formula):
        args = tuple(args[0])
    parts = []
    for a in _flatten(And, args):
        if a is FALSE or a == FALSE:
            return FALSE
        if a != TRUE:
            parts.append(a)
    if not parts:
        return TRUE
    if len(parts) == 1:
        return parts[0]
    return And(parts)


def disj(*args: Formula) -> Formula:
    if len(args) == 1 and not isinstance(args[0], Formula):
        args = tuple(args[0])
    parts = []
    for a in _flatten(Or, args):
        if a == TRUE:
            return TRUE
        if a != FALSE:
            parts.append(a)
    if not parts:
        return FALSE
    if len(parts) == 1:
        return parts[0]
    return Or(parts)


def neg(f: Formula) -> Formula:
    if f == TRUE:
        return FALSE
    if f == FALSE:
        return TRUE
    if isinstance(f, Not):
        return f.arg
    if isinstance(f, Atom):
        return negate_atom(f)
    return Not(f)


def implies(a: Formula, b: Formula) -> Formula:
    if a == TRUE:
        return b
    if a == FALSE or b == TRUE:
        return TRUE
    return Implies(a, b)


def exists(vs: Iterable[Var], body: Formula) -> Formula:
    vs = [v for v in vs if v in body.free_vars]
    return Exists(vs, body) if vs else body


def forall(vs: Iterable[Var], body: Formula) -> Formula:
    vs = [v for v in vs if v in body.free_vars]
    return Forall(vs, body) if vs else body


def negate_atom(a: Atom) -> Formula:
    e = a.lhs - a.bound
    if a.op == "=":
        return mk_atom("!=", e)
    if a.op == "!=":
        return mk_atom("=", e)
    if a.op == "<=":
        return mk_atom(">", e)
    return mk_atom(">=", e)


# --------------------------------------------------------------------------
# traversals


def free_vars(f: Formula) -> frozenset[Var]:
    return f.free_vars


def is_quantifier_free(f: Formula) -> bool:
    if isinstance(f, (Atom, _Const)):
        return True
    if isinstance(f, _Quant):
        return False
    if isinstance(f, Not):
        return is_quantifier_free(f.arg)
    if isinstance(f, Implies):
        return is_quantifier_free(f.lhs) and is_quantifier_free(f.rhs)
    return all(is_quantifier_free(a) for a in f.args)


def atoms(f: Formula) -> set[Atom]:
    out: set[Atom] = set()
    stack = [f]
    while stack:
        g = stack.pop()
        if isinstance(g, Atom):
            out.add(g)
        elif isinstance(g, Not):
            stack.append(g.arg)
        elif isinstance(g, _NAry):
            stack.extend(g.args)
        elif isinstance(g, Implies):
            stack.extend((g.lhs, g.rhs))
        elif isinstance(g, _Quant):
            stack.append(g.body)
    return out


def size(f: Formula) -> int:
    if isinstance(f, (Atom, _Const)):
        return 1
    if isinstance(f, Not):
        return 1 + size(f.arg)
    if isinstance(f, Implies):
        return 1 + size(f.lhs) + size(f.rhs)
    if isinstance(f, _Quant):
        return 1 + size(f.body)
    return 1 + sum(size(a) for a in f.args)


def nnf(f: Formula) -> Formula:
    """Negation normal form: no Not, no Implies; negated atoms are flipped."""
    return _nnf(f, True)


def _nnf(f: Formula, pos: bool) -> Formula:
    if isinstance(f, _Const):
        return f if pos else neg(f)
    if isinstance(f, Atom):
        return f if pos else negate_atom(f)
    if isinstance(f, Not):
        return _nnf(f.arg, not pos)
    if isinstance(f, Implies):
        if pos:
            return disj(_nnf(f.lhs, False), _nnf(f.rhs, True))
        return conj(_nnf(f.lhs, True), _nnf(f.rhs, False))
    if isinstance(f, And):
        parts = [_nnf(a, pos) for a in f.args]
        return conj(*parts) if pos else disj(*parts)
    if isinstance(f, Or):
        parts = [_nnf(a, pos) for a in f.args]
        return disj(*parts) if pos else conj(*parts)
    if isinstance(f, Exists):
        body = _nnf(f.body, pos)
        return exists(f.vars, body) if pos else forall(f.vars, body)
    if isinstance(f, Forall):
        body = _nnf(f.body, pos)
        return forall(f.vars, body) if pos else exists(f.vars, body)
    raise TypeError(f"not a formula: {f!r}")


def _coerce_sigma(sigma: Mapping[Var, Term]) -> dict[Var, LinExpr]:
    out = {}
    for v, t in sigma.items():
        t = LinExpr.of(t)
        if v.sort is Sort.INT and t.sort is Sort.REAL:
            raise SortError(f"cannot substitute Real-sorted term {t} for Int variable {v}")
        out[v] = t
    return out


def substitute(f: Formula, sigma: Mapping[Var, Term]) -> Formula:
    """Capture-avoiding simultaneous substitution of terms for variables."""
    return _subst(f, _coerce_sigma(sigma))


def substitute_unchecked(f: Formula, sigma: Mapping[Var, LinExpr]) -> Formula:
    """Like substitute but without sort checks (used by projection internals)."""
    return _subst(f, {v: LinExpr.of(t) for v, t in sigma.items()})


def _subst(f: Formula, sigma: dict[Var, LinExpr]) -> Formula:
    if not sigma:
        return f
    fv = f.free_vars
    if fv.isdisjoint(sigma):
        return f
    if isinstance(f, Atom):
        e = LinExpr(((v, c) for v, c in f.coeffs if v not in sigma), -f.bound)
        for v, c in f.coeffs:
            if v in sigma:
                e = e + sigma[v] * c
        return mk_atom(f.op, e)
    if isinstance(f, Not):
        return neg(_subst(f.arg, sigma))
    if isinstance(f, And):
        return conj(*(_subst(a, sigma) for a in f.args))
    if isinstance(f, Or):
        return disj(*(_subst(a, sigma) for a in f.args))
    if isinstance(f, Implies):
        return implies(_subst(f.lhs, sigma), _subst(f.rhs, sigma))
    if isinstance(f, _Quant):
        inner = {v: t for v, t in sigma.items() if v not in f.vars and v in fv}
        if not inner:
            return f
        range_vars = set()
        for t in inner.values():
            range_vars |= t.vars
        ren = {}
        for v in f.vars:
            if v in range_vars:
                ren[v] = LinExpr.of(fresh_var(v))
        bound = [ren[v].coeffs[0][0] if v in ren else v for v in f.vars]
        body = _subst(f.body, {**inner, **ren})
        cls = type(f)
        return cls(bound, body) if any(b in body.free_vars for b in bound) else body
    raise TypeError(f"not a formula: {f!r}")


def rename(f: Formula, mapping: Mapping[Var, Var]) -> Formula:
    return _subst(f, {v: LinExpr.of(w) for v, w in mapping.items()})


# --------------------------------------------------------------------------
# models


class Model(Mapping):
    """An immutable assignment of rational values to variables."""

    __slots__ = ("_d",)

    def __init__(self, assignment=()):
        d = {}
        items = assignment.items() if isinstance(assignment, Mapping) else assignment
        for v, val in items:
            val = _frac(val)
            if v.sort is Sort.INT and val.denominator != 1:
                raise SortError(f"non-integral value {val} for Int variable {v}")
            d[v] = val
        self._d = d

    def __getitem__(self, v: Var) -> Fraction:
        return self._d[v]

    def __iter__(self):
        return iter(sorted(self._d, key=lambda v: v.key))

    def __len__(self) -> int:
        return len(self._d)

    def __hash__(self) -> int:
        return hash(frozenset(self._d.items()))

    def __eq__(self, other) -> bool:
        if isinstance(other, Model):
            return self._d == other._d
        return NotImplemented

    def restrict(self, vs: Iterable[Var]) -> Model:
        return Model({v: self._d[v] for v in vs if v in self._d})

    def extend(self, other: Mapping) -> Model:
        d = dict(self._d)
        d.update(other)
        return Model(d)

    def rename(self, mapping: Mapping[Var, Var]) -> Model:
        return Model({mapping.get(v, v): val for v, val in self._d.items()})

    def at_step(self, state_vars: Iterable[Var], k: int) -> Model:
        """Read the step-``k`` copy of ``state_vars`` back as a state."""
        return Model({v: self._d.get(v.at(k), Fraction(0)) for v in state_vars})

    def as_subst(self) -> dict[Var, LinExpr]:
        return {v: LinExpr((), val) for v, val in self._d.items()}

    def __str__(self) -> str:
        return "{" + ", ".join(f"{v}={_fmt_num(self._d[v])}" for v in self) + "}"

    __repr__ = __str__


def _fmt_num(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def evaluate(f: Formula, m: Mapping[Var, Number]) -> bool:
    """Truth value of a quantifier-free formula under a total model."""
    if isinstance(f, Atom):
        total = Fraction(0)
        for v, c in f.coeffs:
            try:
                total += c * m[v]
            except KeyError:
                raise UnboundVariableError(v) from None
        return f.holds(total)
    if isinstance(f, _Const):
        return f.value
    if isinstance(f, And):
        return all(evaluate(a, m) for a in f.args)
    if isinstance(f, Or):
        return any(evaluate(a, m) for a in f.args)
    if isinstance(f, Not):
        return not evaluate(f.arg, m)
    if isinstance(f, Implies):
        return (not evaluate(f.lhs, m)) or evaluate(f.rhs, m)
    if isinstance(f, _Quant):
        raise QuantifierError("evaluate needs a quantifier-free formula")
    raise TypeError(f"not a formula: {f!r}")


# --------------------------------------------------------------------------
# transition systems


@dataclass(frozen=True)
class TransitionSystem:
    """Initial states ``init(x)``, transitions ``trans(x, x')`` and ``assertion(x)``."""

    state_vars: tuple[Var, ...]
    init: Formula
    trans: Formula
    assertion: Formula
    name: str = ""
    _prime_map: dict = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        svs = tuple(self.state_vars)
        object.__setattr__(self, "state_vars", svs)
        if len(set(svs)) != len(svs):
            raise ValueError("duplicate state variables")
        if any(v.index is not None for v in svs):
            raise ValueError("state variables must be unindexed")
        names = [v.name for v in svs]
        if len(set(names)) != len(names):
            raise ValueError("state variables need distinct names")
        cur = set(svs)
        both = cur | {v.primed() for v in svs}
        for label, f, allowed in (("init", self.init, cur), ("trans", self.trans, both),
                                  ("assertion", self.assertion, cur)):
            extra = f.free_vars - allowed
            if extra:
                raise ValueError(f"{label} mentions non-state variables {sorted(map(str, extra))}")
        object.__setattr__(self, "_prime_map", {v: v.primed() for v in svs})

    @property
    def primed_vars(self) -> tuple[Var, ...]:
        return tuple(v.primed() for v in self.state_vars)

    def prime(self, f: Formula) -> Formula:
        return rename(f, self._prime_map)

    def unprime(self, f: Formula) -> Formula:
        return rename(f, {v.primed(): v for v in self.state_vars})

    def at(self, f: Formula, k: int) -> Formula:
        """``f(x)`` over step-``k`` copies ``x@k``."""
        return rename(f, {v: v.at(k) for v in self.state_vars})

    def trans_at(self, k: int) -> Formula:
        """``trans(x@k, x@k+1)``."""
        m = {v: v.at(k) for v in self.state_vars}
        m.update({v.primed(): v.at(k + 1) for v in self.state_vars})
        return rename(self.trans, m)

    def image_formula(self, f: Formula) -> Formula:
        """``exists x0. f(x0) & trans(x0, x)`` as a quantified formula over x."""
        tmp = {v: fresh_var(v, "p") for v in self.state_vars}
        body = conj(rename(f, tmp), rename(self.trans, {**tmp, **{v.primed(): v for v in self.state_vars}}))
        return exists(tmp.values(), body)

    def preimage_formula(self, f: Formula) -> Formula:
        """``exists x'. trans(x, x') & f(x')``."""
        return exists(self.primed_vars, conj(self.trans, self.prime(f)))

    def state_model(self, m: Mapping[Var, Number]) -> Model:
        return Model({v: m.get(v, 0) for v in self.state_vars})
