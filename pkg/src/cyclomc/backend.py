"""Satisfiability and entailment queries.

The internal engine (cyclomc.lra plus quantifier elimination) is always
available.  An external SMT-LIB2 solver can be used instead by passing its
path, or through the CYCLOMC_SOLVER environment variable; the external
process is kept alive for the lifetime of the session and is reset before
every query.
"""

from __future__ import annotations

import enum
import logging
import os
import select
import shlex
import shutil
import subprocess
import threading
import time
from collections.abc import Callable
from dataclasses import dataclass, field
from fractions import Fraction

from cyclomc import lra
from cyclomc.logic import (
    And,
    Exists,
    Forall,
    Formula,
    Model,
    Or,
    Sort,
    Var,
    conj,
    disj,
    evaluate,
    fresh_var,
    neg,
    nnf,
    rename,
)
from cyclomc.qelim import qe_forall
from cyclomc.syntax import formula_sexp, parse_sexp, symbol, unquote, value_of

log = logging.getLogger(__name__)

ENV_VAR = "CYCLOMC_SOLVER"


class TransportError(RuntimeError):
    """The external solver process misbehaved (died, garbled output, error reply)."""


class Cancelled(Exception):
    """A query was attempted after the session's cancel event was set."""


class BackendUnknown(Exception):
    """A query whose answer the caller needs came back Unknown."""


class SatStatus(enum.Enum):
    SAT = "sat"
    UNSAT = "unsat"
    UNKNOWN = "unknown"


class Entailment(enum.Enum):
    VALID = "valid"
    INVALID = "invalid"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class SatResult:
    status: SatStatus
    model: Model | None = None
    reason: str = ""

    @property
    def sat(self) -> bool:
        return self.status is SatStatus.SAT

    @property
    def unsat(self) -> bool:
        return self.status is SatStatus.UNSAT


@dataclass(frozen=True)
class EntailmentResult:
    status: Entailment
    model: Model | None = None
    reason: str = ""

    @property
    def valid(self) -> bool:
        return self.status is Entailment.VALID

    @property
    def invalid(self) -> bool:
        return self.status is Entailment.INVALID


@dataclass
class SessionStats:
    queries: int = 0
    sat: int = 0
    unsat: int = 0
    unknown: int = 0
    seconds: float = 0.0
    by_backend: dict = field(default_factory=dict)


def _skolemize(f: Formula) -> Formula:
    """Quantifier-free formula equisatisfiable with ``f``.

    Existentials in positive position become fresh free variables; universals
    are eliminated.  Input should be in NNF.
    """
    if isinstance(f, Exists):
        ren = {v: fresh_var(v, "sk") for v in f.vars}
        return _skolemize(rename(f.body, ren))
    if isinstance(f, Forall):
        return qe_forall(f.vars, f.body)
    if isinstance(f, And):
        return conj(*(_skolemize(a) for a in f.args))
    if isinstance(f, Or):
        return disj(*(_skolemize(a) for a in f.args))
    return f


def prepare(f: Formula) -> Formula:
    return _skolemize(nnf(f))


# --------------------------------------------------------------------------
# external solver process


def _solver_command(path: str) -> list[str]:
    parts = shlex.split(path)
    if len(parts) > 1:
        return parts
    exe = shutil.which(path) or path
    base = os.path.basename(exe)
    if base.startswith("z3"):
        return [exe, "-in", "-smt2"]
    if base.startswith("cvc5") or base.startswith("cvc4"):
        return [exe, "--lang=smt2", "--incremental", "--produce-models"]
    if base.startswith("yices"):
        return [exe, "--incremental"]
    return [exe]


class SmtLibProcess:
    """A persistent SMT-LIB2 solver process driven over pipes."""

    def __init__(self, path: str, timeout: float | None = None):
        self.cmd = _solver_command(path)
        self.timeout = timeout
        self.proc: subprocess.Popen | None = None
        self._buf = b""

    def _start(self):
        try:
            self.proc = subprocess.Popen(self.cmd, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                                         stderr=subprocess.DEVNULL)
        except OSError as exc:
            raise TransportError(f"cannot start solver {self.cmd[0]}: {exc}") from exc
        self._buf = b""

    def _send(self, text: str):
        if self.proc is None or self.proc.poll() is not None:
            self._start()
        try:
            self.proc.stdin.write(text.encode())
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            self.close()
            raise TransportError(f"solver pipe closed: {exc}") from exc

    def _complete(self) -> int:
        """Length of the first complete response in the buffer, or 0."""
        s = self._buf
        i = 0
        while i < len(s) and s[i:i + 1].isspace():
            i += 1
        if i >= len(s):
            return 0
        if s[i:i + 1] != b"(":
            j = s.find(b"\n", i)
            return j + 1 if j >= 0 else 0
        depth = 0
        quoted = False
        while i < len(s):
            c = s[i:i + 1]
            if quoted:
                if c in (b"|", b'"'):
                    quoted = False
            elif c in (b"|", b'"'):
                quoted = True
            elif c == b"(":
                depth += 1
            elif c == b")":
                depth -= 1
                if depth == 0:
                    return i + 1
            i += 1
        return 0

    def _read(self, deadline: float | None) -> str:
        fd = self.proc.stdout.fileno()
        while True:
            n = self._complete()
            if n:
                out, self._buf = self._buf[:n], self._buf[n:]
                return out.decode().strip()
            wait = None if deadline is None else max(0.0, deadline - time.monotonic())
            ready, _, _ = select.select([fd], [], [], wait)
            if not ready:
                raise TimeoutError
            chunk = os.read(fd, 65536)
            if not chunk:
                self.close()
                raise TransportError("solver exited unexpectedly")
            self._buf += chunk

    def check(self, f: Formula, vars_: list[Var]) -> tuple[SatStatus, dict | None]:
        sorts = {v.sort for v in vars_}
        if sorts <= {Sort.INT}:
            logic = "QF_LIA"
        elif sorts == {Sort.REAL}:
            logic = "QF_LRA"
        else:
            logic = None
        lines = ["(reset)", "(set-option :produce-models true)"]
        if logic:
            lines.append(f"(set-logic {logic})")
        for v in vars_:
            lines.append(f"(declare-fun {symbol(v, True)} () {v.sort})")
        lines.append(f"(assert {formula_sexp(f, quote_all=True)})")
        lines.append("(check-sat)")
        deadline = None if self.timeout is None else time.monotonic() + self.timeout
        self._send("\n".join(lines) + "\n")
        try:
            # (reset) and set-option may echo "success" on some solvers
            while True:
                ans = self._read(deadline)
                if ans != "success":
                    break
            if ans.startswith("(error"):
                raise TransportError(f"solver error: {ans}")
            if ans == "unsat":
                return SatStatus.UNSAT, None
            if ans == "unknown":
                return SatStatus.UNKNOWN, None
            if ans != "sat":
                raise TransportError(f"unexpected solver reply: {ans!r}")
            self._send("(get-model)\n")
            raw = self._read(deadline)
        except TimeoutError:
            self.close()
            return SatStatus.UNKNOWN, None
        return SatStatus.SAT, self._parse_model(raw, vars_)

    @staticmethod
    def _parse_model(raw: str, vars_: list[Var]) -> dict:
        by_name = {str(v): v for v in vars_}
        s = parse_sexp(raw)
        if s and s[0] == "model":
            s = s[1:]
        values = {}
        for item in s:
            if isinstance(item, list) and item and item[0] == "define-fun" and item[2] == []:
                name = unquote(item[1])
                if name in by_name:
                    values[by_name[name]] = value_of(item[4])
        return values

    def close(self):
        if self.proc is not None:
            try:
                self.proc.kill()
                self.proc.wait(timeout=5)
            except Exception:  # noqa: BLE001 - best effort
                pass
            for stream in (self.proc.stdin, self.proc.stdout):
                try:
                    stream.close()
                except Exception:  # noqa: BLE001
                    pass
        self.proc = None


# --------------------------------------------------------------------------
# sessions


class SolverSession:
    """Answers satisfiability and entailment queries.

    ``solver`` is the path (or command line) of an SMT-LIB2 solver; None means
    ``$CYCLOMC_SOLVER`` and, if that is unset or ``internal``, the built-in
    engine.  A session is not thread-safe; give each thread its own.
    """

    def __init__(self, solver: str | None = None, timeout: float | None = None,
                 cancel: threading.Event | None = None, node_budget: int = lra.DEFAULT_NODE_BUDGET):
        if solver is None:
            solver = os.environ.get(ENV_VAR) or None
        if solver in ("", "internal"):
            solver = None
        self.solver = solver
        self.timeout = timeout
        self.cancel = cancel
        self.node_budget = node_budget
        self.stats = SessionStats()
        self._ext = SmtLibProcess(solver, timeout) if solver else None

    @property
    def name(self) -> str:
        return self.solver or "internal"

    def close(self):
        if self._ext is not None:
            self._ext.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def check_sat(self, f: Formula) -> SatResult:
        if self.cancel is not None and self.cancel.is_set():
            raise Cancelled()
        t0 = time.perf_counter()
        try:
            res = self._check(f)
        finally:
            self.stats.seconds += time.perf_counter() - t0
        self.stats.queries += 1
        if res.status is SatStatus.SAT:
            self.stats.sat += 1
        elif res.status is SatStatus.UNSAT:
            self.stats.unsat += 1
        else:
            self.stats.unknown += 1
        return res

    def _check(self, f: Formula) -> SatResult:
        fv = sorted(f.free_vars, key=lambda v: v.key)
        g = prepare(f)
        gv = sorted(g.free_vars | set(fv), key=lambda v: v.key)
        if self._ext is not None:
            status, values = self._ext.check(g, gv)
            if status is not SatStatus.SAT:
                return SatResult(status, reason="solver answered unknown" if status is SatStatus.UNKNOWN else "")
            values = {v: values.get(v, Fraction(0)) for v in gv}
        else:
            try:
                m = lra.check_sat(g, integral=True, budget=self.node_budget)
            except lra.Undecided as exc:
                return SatResult(SatStatus.UNKNOWN, reason=str(exc))
            if m is None:
                return SatResult(SatStatus.UNSAT)
            values = {v: m.get(v, Fraction(0)) for v in gv}
        try:
            ok = evaluate(g, values)
        except Exception as exc:  # noqa: BLE001
            return SatResult(SatStatus.UNKNOWN, reason=f"model check failed: {exc}")
        if not ok:
            return SatResult(SatStatus.UNKNOWN, reason="model check failed")
        return SatResult(SatStatus.SAT, Model({v: values[v] for v in fv}))

    def check_entailment(self, lhs: Formula, rhs: Formula) -> EntailmentResult:
        """Is every model of ``lhs`` a model of ``rhs``?"""
        res = self.check_sat(conj(lhs, neg(rhs)))
        if res.status is SatStatus.UNSAT:
            return EntailmentResult(Entailment.VALID)
        if res.status is SatStatus.SAT:
            return EntailmentResult(Entailment.INVALID, res.model)
        return EntailmentResult(Entailment.UNKNOWN, reason=res.reason)

    # convenience wrappers that turn Unknown into an exception

    def entails(self, lhs: Formula, rhs: Formula) -> bool:
        r = self.check_entailment(lhs, rhs)
        if r.status is Entailment.UNKNOWN:
            raise BackendUnknown(r.reason)
        return r.valid

    def equivalent(self, a: Formula, b: Formula) -> bool:
        return self.entails(a, b) and self.entails(b, a)

    def model(self, f: Formula) -> Model | None:
        r = self.check_sat(f)
        if r.status is SatStatus.UNKNOWN:
            raise BackendUnknown(r.reason)
        return r.model

    def is_sat(self, f: Formula) -> bool:
        return self.model(f) is not None


def session_factory(solver: str | None = None, timeout: float | None = None,
                    cancel: threading.Event | None = None) -> Callable[[], SolverSession]:
    """A zero-argument constructor for sessions sharing a configuration."""
    return lambda: SolverSession(solver, timeout, cancel)


def external_solver_available(path: str = "z3") -> bool:
    return shutil.which(shlex.split(path)[0]) is not None


__all__ = [
    "BackendUnknown", "Cancelled", "Entailment", "EntailmentResult", "SatResult", "SatStatus",
    "SessionStats", "SmtLibProcess", "SolverSession", "TransportError", "session_factory",
    "external_solver_available", "prepare",
]
