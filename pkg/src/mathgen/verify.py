"""Numeric verification of candidate solutions.

Equivalence and solution checks are falsifiable-numeric: a symbolic-zero test
runs first as an optimization, then randomized probing decides.  When probes
cannot be established the verdict is "undecidable", never "valid".
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from itertools import product as _iproduct
from typing import Iterable, List, Optional, Sequence, Tuple

from .calculus import (
    PROBE_CONSTANTS,
    compile_probe,
    differentiate,
    draw_probe_point,
    evaluate_probe,
)
from .expr import (
    Expr,
    MalformedSequenceError,
    ZERO,
    free_constants,
    free_variables,
    parse_prefix,
    substitute,
)
from .simplify import simplify

VALID = "valid"
INVALID = "invalid"
UNDECIDABLE = "undecidable"


@dataclass(frozen=True)
class ProbeConfig:
    probes: int = 20
    min_survivors: int = 4
    rel_tol: float = 1e-6
    x_low: float = 1e-2
    x_high: float = 10.0
    constant_values: Tuple[float, ...] = (0.5, 1.0, 2.0, -1.0)
    min_assignments: int = 3
    magnitude_cap: float = 1e8
    seed: int = 0

    def __post_init__(self):
        if self.rel_tol <= 0:
            raise ValueError("tolerance must be positive")
        if self.min_survivors < 3:
            raise ValueError("min_survivors must be >= 3")


DEFAULT_PROBES = ProbeConfig()


@dataclass
class Verdict:
    outcome: str  # valid | invalid | undecidable
    method: str   # symbolic-zero | numeric-probe | substitution | parse-error
    max_residual: float = 0.0
    survivors: int = 0
    witness: Optional[dict] = None

    @property
    def ok(self) -> bool:
        return self.outcome == VALID


def _constant_assignments(names: Sequence[str], cfg: ProbeConfig) -> List[dict]:
    if not names:
        return [{}]
    combos = _iproduct(cfg.constant_values, repeat=len(names))
    return [dict(zip(names, combo)) for combo in combos]


def expr_equiv(a: Expr, b: Expr, variables: Optional[Iterable[str]] = None,
               probes: Optional[ProbeConfig] = None) -> Verdict:
    """Are the two expressions equal (up to numeric tolerance)?"""
    cfg = probes or DEFAULT_PROBES
    diff = simplify(Expr("-", (a, b)))
    if diff == ZERO:
        return Verdict(VALID, "symbolic-zero")

    if variables is None:
        names = sorted(free_variables(a) | free_variables(b))
    else:
        names = sorted(variables)
    consts = sorted((free_constants(a) | free_constants(b)) & set(PROBE_CONSTANTS))
    prog_a = compile_probe(a)
    prog_b = compile_probe(b)
    rng = random.Random(cfg.seed)

    survivors = 0
    live_assignments = 0
    max_res = 0.0
    for assign in _constant_assignments(consts, cfg):
        assignment_survivors = 0
        for _ in range(cfg.probes):
            bind = dict(assign)
            for v in names:
                bind[v] = draw_probe_point(rng, cfg.x_low, cfg.x_high)
            va, ma = evaluate_probe(prog_a, bind)
            vb, mb = evaluate_probe(prog_b, bind)
            if va is None or vb is None:
                continue
            if ma > cfg.magnitude_cap or mb > cfg.magnitude_cap:
                continue
            scale = max(1.0, abs(va), abs(vb))
            res = abs(va - vb) / scale
            max_res = max(max_res, res)
            if res > cfg.rel_tol:
                return Verdict(INVALID, "numeric-probe", max_residual=res,
                               survivors=survivors,
                               witness={"bindings": bind, "lhs": va, "rhs": vb})
            survivors += 1
            assignment_survivors += 1
        if assignment_survivors > 0:
            live_assignments += 1

    needed_assignments = min(cfg.min_assignments, len(_constant_assignments(consts, cfg))) \
        if consts else 1
    if survivors >= cfg.min_survivors and live_assignments >= needed_assignments:
        return Verdict(VALID, "numeric-probe", max_residual=max_res, survivors=survivors)
    return Verdict(UNDECIDABLE, "numeric-probe", max_residual=max_res, survivors=survivors)


def check_integral(problem: Expr, hypothesis: Expr,
                   probes: Optional[ProbeConfig] = None) -> Verdict:
    """Differentiate the hypothesis and compare it with the integrand."""
    try:
        derived = differentiate(hypothesis, "x")
    except Exception:
        return Verdict(INVALID, "parse-error",
                       witness={"error": "cannot differentiate hypothesis"})
    return expr_equiv(derived, problem, probes=probes)


def _additive_terms(e: Expr) -> List[Tuple[int, Expr]]:
    out: List[Tuple[int, Expr]] = []

    def walk(node: Expr, sign: int):
        if node.op == "+":
            walk(node.args[0], sign)
            walk(node.args[1], sign)
        elif node.op == "-":
            walk(node.args[0], sign)
            walk(node.args[1], -sign)
        else:
            out.append((sign, node))

    walk(e, 1)
    return out


def check_ode(equation: Expr, hypothesis: Expr, order: int,
              probes: Optional[ProbeConfig] = None) -> Verdict:
    """Substitute the hypothesis (and its derivatives) for y, y', y'' and
    require the residual to vanish across probe points and constant values.

    The residual is scaled by the largest additive term of the substituted
    equation, which guards against catastrophic cancellation."""
    cfg = probes or DEFAULT_PROBES
    subs = {"y": hypothesis, "y'": differentiate(hypothesis, "x")}
    if order >= 2:
        subs["y''"] = differentiate(subs["y'"], "x")
    residual = substitute(equation, subs)

    unbound = free_variables(residual) - {"x"}
    if unbound:
        return Verdict(UNDECIDABLE, "substitution",
                       witness={"error": f"unbound symbols {sorted(unbound)}"})
    consts = sorted(free_constants(residual) & set(PROBE_CONSTANTS))
    terms = _additive_terms(residual)
    programs = [(sign, compile_probe(t)) for sign, t in terms]
    rng = random.Random(cfg.seed)

    assignments = _constant_assignments(consts, cfg)
    passing = 0
    live = 0
    total_survivors = 0
    max_res = 0.0
    for assign in assignments:
        survivors = 0
        for _ in range(cfg.probes):
            bind = dict(assign)
            bind["x"] = draw_probe_point(rng, cfg.x_low, cfg.x_high)
            total = 0.0
            scale = 1.0
            dead = False
            for sign, prog in programs:
                v, m = evaluate_probe(prog, bind)
                if v is None or m > cfg.magnitude_cap:
                    dead = True
                    break
                total += sign * v
                scale = max(scale, abs(v))
            if dead:
                continue
            survivors += 1
            total_survivors += 1
            res = abs(total) / scale
            max_res = max(max_res, res)
            if res > cfg.rel_tol:
                return Verdict(INVALID, "substitution", max_residual=res,
                               survivors=total_survivors,
                               witness={"bindings": bind, "residual": total})
        if survivors >= min(3, cfg.min_survivors):
            live += 1
            passing += 1  # any decisive violation already returned invalid

    needed = min(cfg.min_assignments, len(assignments)) if consts else 1
    if passing >= needed and total_survivors >= cfg.min_survivors:
        return Verdict(VALID, "substitution", max_residual=max_res,
                       survivors=total_survivors)
    return Verdict(UNDECIDABLE, "substitution", max_residual=max_res,
                   survivors=total_survivors)


# Batch verification -----------------------------------------------------------

_ODE_TASKS = {"ode1": 1, "ode2": 2}
_INTEGRAL_TASKS = ("fwd", "bwd", "ibp", "integral")


@dataclass
class LineVerdict:
    line: int
    problem: str
    outcome: str
    method: str
    max_residual: float

    def to_json(self) -> str:
        return json.dumps({
            "line": self.line,
            "outcome": self.outcome,
            "method": self.method,
            "max_residual": self.max_residual,
        })


@dataclass
class BatchReport:
    lines: List[LineVerdict] = field(default_factory=list)
    problems: int = 0
    solved: int = 0

    @property
    def accuracy(self) -> float:
        return self.solved / self.problems if self.problems else 0.0

    def to_json_lines(self) -> str:
        body = "\n".join(lv.to_json() for lv in self.lines)
        tail = json.dumps({
            "problems": self.problems,
            "solved": self.solved,
            "accuracy": self.accuracy,
        })
        return body + ("\n" if body else "") + tail


def verify_batch(lines: Iterable[str], probes: Optional[ProbeConfig] = None,
                 default_task: str = "integral") -> BatchReport:
    """Verify "problem TAB hypothesis [TAB task]" lines.  A problem may appear
    on several lines (one per hypothesis); it counts as solved when any of its
    hypotheses is valid."""
    cfg = probes or DEFAULT_PROBES
    report = BatchReport()
    solved_by: dict = {}
    for idx, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n")
        if not line.strip():
            continue
        parts = line.split("\t")
        task = parts[2].strip() if len(parts) >= 3 and parts[2].strip() else default_task
        if len(parts) < 2:
            report.lines.append(LineVerdict(idx, line, INVALID, "parse-error", 0.0))
            continue
        key = (parts[0], task)
        solved_by.setdefault(key, False)
        try:
            problem = parse_prefix(parts[0])
            hypothesis = parse_prefix(parts[1])
        except MalformedSequenceError:
            report.lines.append(LineVerdict(idx, parts[0], INVALID, "parse-error", 0.0))
            continue
        if task in _ODE_TASKS:
            verdict = check_ode(problem, hypothesis, _ODE_TASKS[task], cfg)
        elif task in _INTEGRAL_TASKS:
            verdict = check_integral(problem, hypothesis, cfg)
        else:
            report.lines.append(LineVerdict(idx, parts[0], INVALID, "parse-error", 0.0))
            continue
        report.lines.append(LineVerdict(idx, parts[0], verdict.outcome,
                                        verdict.method, verdict.max_residual))
        if verdict.ok:
            solved_by[key] = True
    report.problems = len(solved_by)
    report.solved = sum(1 for v in solved_by.values() if v)
    return report
