"""Command-line front end.

Exit status: 0 SAFE or BOUNDED_SAFE, 1 UNSAFE, 2 UNKNOWN, 3 for any error
(bad input, bad usage, a certificate that fails re-validation).
"""

from __future__ import annotations

import argparse
import concurrent.futures as cf
import sys
import threading
import time
from dataclasses import replace
from pathlib import Path

from cyclomc.backend import BackendUnknown, Cancelled, SolverSession, TransportError
from cyclomc.logic import Formula, LogicError
from cyclomc.problem import Problem, ProblemError, parse_problem
from cyclomc.proof import Certificate, Verdict, export_dot, invariant_violations, replay_trace
from cyclomc.strategies.bmc import back_bmc, bmc, forward_criterion
from cyclomc.strategies.common import Budget, ModelStream, SeededModels
from cyclomc.strategies.impact import impact, impact_mc
from cyclomc.strategies.mcr import DEFAULT_STRENGTH
from cyclomc.strategies.pdr import spdr
from cyclomc.strategies.predabs import predicate_abstraction
from cyclomc.syntax import FormulaReader, SyntaxErrorS, formula_sexp, parse_sexp

STRATEGIES = ("bmc", "forward", "predabs", "impact", "impact-mc", "spdr", "back-bmc", "portfolio")
ENGINES = ("naive", "ind", "indpdr", "indpdr-mbp")
PORTFOLIO = ("spdr", "impact", "impact-mc", "forward", "bmc")
EXIT_ERROR = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="cyclomc", description="Safety verification of linear transition systems by cyclic proofs.")
    ap.add_argument("problem", help="problem file (native format or SMT-LIB2 HORN); '-' reads stdin")
    ap.add_argument("--strategy", choices=STRATEGIES, default="spdr")
    ap.add_argument("--engine", choices=ENGINES, default="ind", help="refinement engine for impact-mc")
    ap.add_argument("--bound", type=int, default=10, metavar="K", help="unrolling bound for bmc, forward, back-bmc")
    ap.add_argument("--predicates", metavar="FILE", help="predicates for predabs, one formula per line")
    ap.add_argument("--seed", type=int, metavar="N", help="seed for model selection")
    ap.add_argument("--solver", metavar="PATH", help="SMT-LIB2 solver (overrides $CYCLOMC_SOLVER; 'internal' for none)")
    ap.add_argument("--timeout", type=float, help="per-query timeout in seconds (external solver)")
    ap.add_argument("--emit-proof", metavar="PATH", help="write the proof (or trace) as Graphviz DOT")
    ap.add_argument("--stats", action="store_true", help="print query and refinement counts")
    ap.add_argument("--strength", choices=("strongest", "weakest", "generalized"), default=DEFAULT_STRENGTH)
    ap.add_argument("--induction", action="store_true", help="enable the Induction rule in spdr")
    ap.add_argument("--max-unrollings", type=int, default=64)
    ap.add_argument("--max-refinements", type=int, default=256)
    ap.add_argument("--max-iterations", type=int, default=10_000)
    return ap


def read_predicates(path: str, prob: Problem) -> list[Formula]:
    reader = FormulaReader({str(v): v for v in prob.ts.state_vars})
    out = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split(";", 1)[0].strip()
        if not line:
            continue
        try:
            out.append(reader.formula(parse_sexp(line)))
        except (SyntaxErrorS, LogicError) as exc:
            raise ProblemError(f"{path}:{lineno}: {exc}") from exc
    return out


def _models(args) -> ModelStream:
    return SeededModels(args.seed) if args.seed is not None else ModelStream()


def run_strategy(name: str, prob: Problem, args, session: SolverSession, preds=None) -> Certificate:
    ts = prob.ts
    budget = Budget(args.max_unrollings, args.max_refinements, args.max_iterations)
    if name == "bmc":
        return bmc(ts, args.bound, session)
    if name == "forward":
        return forward_criterion(ts, args.bound, session)
    if name == "back-bmc":
        return back_bmc(ts, args.bound, session)
    if name == "predabs":
        return predicate_abstraction(ts, preds or [], session, budget)
    if name == "impact":
        return impact(ts, session, budget, args.strength)
    if name == "impact-mc":
        return impact_mc(ts, session, args.engine, budget, args.strength, _models(args))
    if name == "spdr":
        return spdr(ts, session, budget, _models(args), args.strength, args.induction)
    raise ValueError(name)


def run_portfolio(prob: Problem, args, preds=None) -> Certificate:
    """Race several strategies; the first SAFE/UNSAFE wins, the rest are cancelled."""
    names = list(PORTFOLIO) + (["predabs"] if preds else [])
    cancel = threading.Event()
    results: dict[str, Certificate] = {}

    def work(name):
        with SolverSession(args.solver, args.timeout, cancel) as s:
            try:
                return name, run_strategy(name, prob, args, s, preds)
            except (BackendUnknown, TransportError) as exc:
                return name, Certificate.unknown(f"{name}: {exc}", strategy=name)

    with cf.ThreadPoolExecutor(max_workers=len(names)) as pool:
        futs = [pool.submit(work, n) for n in names]
        for fut in cf.as_completed(futs):
            try:
                name, cert = fut.result()
            except Cancelled:
                continue
            results[name] = cert
            if cert.verdict in (Verdict.SAFE, Verdict.UNSAFE):
                cancel.set()
                return replace(cert, strategy=f"portfolio/{cert.strategy or name}")
    for v in (Verdict.BOUNDED_SAFE, Verdict.UNKNOWN):
        for name in names:
            if name in results and results[name].verdict is v:
                return replace(results[name], strategy=f"portfolio/{results[name].strategy or name}")
    return Certificate.unknown("no strategy finished", strategy="portfolio")


def validate(prob: Problem, cert: Certificate, session: SolverSession) -> list[str]:
    ts = prob.ts
    if cert.verdict is Verdict.SAFE:
        return invariant_violations(ts, cert.invariant, session)
    if cert.verdict is Verdict.UNSAFE:
        return [] if replay_trace(ts, cert.trace) else ["trace does not replay"]
    return []


def render(cert: Certificate, prob: Problem) -> list[str]:
    lines = [f"verdict: {cert.verdict.value}", f"strategy: {cert.strategy}"]
    if cert.verdict is Verdict.SAFE:
        lines.append(f"invariant: {formula_sexp(cert.invariant)}")
    elif cert.verdict is Verdict.UNSAFE:
        lines.append(f"trace-length: {len(cert.trace) - 1}")
        for i, st in enumerate(cert.trace):
            vals = " ".join(f"{v}={st[v]}" for v in prob.ts.state_vars)
            lines.append(f"step {i}: {vals}")
    elif cert.verdict is Verdict.BOUNDED_SAFE:
        lines.append(f"bound: {cert.bound}")
    else:
        lines.append(f"reason: {cert.reason}")
    if prob.expect is not None and cert.verdict in (Verdict.SAFE, Verdict.UNSAFE):
        agree = cert.verdict.value.lower() == prob.expect
        lines.append(f"expected: {prob.expect} ({'agrees' if agree else 'DISAGREES'})")
    return lines


def trace_dot(cert: Certificate) -> str:
    lines = ["digraph trace {", "  node [shape=box, fontname=monospace];"]
    for i, st in enumerate(cert.trace or ()):
        lines.append(f'  s{i} [label="{i}: {st}"];')
        if i:
            lines.append(f"  s{i - 1} -> s{i};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    t0 = time.perf_counter()
    try:
        text = sys.stdin.read() if args.problem == "-" else Path(args.problem).read_text()
        prob = parse_problem(text, name=Path(args.problem).stem)
        preds = read_predicates(args.predicates, prob) if args.predicates else None
        if args.strategy == "predabs" and preds is None:
            raise ProblemError("predabs needs --predicates FILE")
        with SolverSession(args.solver, args.timeout) as session:
            if args.strategy == "portfolio":
                cert = run_portfolio(prob, args, preds)
            else:
                try:
                    cert = run_strategy(args.strategy, prob, args, session, preds)
                except BackendUnknown as exc:
                    cert = Certificate.unknown(f"backend: {exc}", strategy=args.strategy)
            problems = validate(prob, cert, session)
            queries = session.stats.queries
    except (OSError, ProblemError, SyntaxErrorS, LogicError, TransportError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if problems:
        print(f"error: certificate failed re-validation: {problems}", file=sys.stderr)
        return EXIT_ERROR
    for line in render(cert, prob):
        print(line)
    if args.stats:
        stats = dict(cert.stats)
        stats.setdefault("refinements", 0)
        extra = " ".join(f"{k}={v}" for k, v in sorted(stats.items()))
        print(f"stats: queries={queries} {extra} seconds={time.perf_counter() - t0:.3f}")
    if args.emit_proof:
        dot = export_dot(cert.proof) if cert.proof is not None else trace_dot(cert)
        Path(args.emit_proof).write_text(dot)
    return cert.verdict.exit_code


__all__ = ["main", "build_parser", "run_strategy", "run_portfolio"]
