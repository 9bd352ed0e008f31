"""Cross-validation of generated datasets against SymPy.

For a sampled fraction of a dataset file, ask the CAS to confirm each pair:
integral tasks check diff(solution) == problem, first/second order equation
tasks check that the solution's residual vanishes.  Disagreements ship a
transcript so they can be triaged (probe tolerance vs CAS domain issues).
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from typing import List, Optional

import sympy as sp

from .convert import ConversionError, X, YDOUBLEPRIME, YPRIME, prefix_to_sympy
from .worker import _Timeout, _deadline, _numeric_equal


@dataclass
class CrossValidationReport:
    checked: int = 0
    agreed: int = 0
    transcripts: List[dict] = field(default_factory=list)

    @property
    def disagreed(self) -> int:
        return self.checked - self.agreed

    @property
    def agreement(self) -> float:
        return self.agreed / self.checked if self.checked else 1.0

    def to_json(self) -> str:
        return json.dumps({
            "checked": self.checked,
            "agreed": self.agreed,
            "agreement": self.agreement,
            "transcripts": self.transcripts,
        }, indent=2)


def _acosh_as_log(e: sp.Expr) -> sp.Expr:
    """acosh(u) -> log(u + sqrt(u^2 - 1)): same values on the real domain, and
    its derivative comes out as u'/sqrt(u^2-1) instead of the split
    sqrt(u-1)*sqrt(u+1) form that defeats symbolic comparison."""
    return e.replace(sp.acosh, lambda u: sp.log(u + sp.sqrt(u * u - 1)))


def _confirm_integral(problem: sp.Expr, solution: sp.Expr, timeout: float,
                      seed: int = 7) -> Optional[str]:
    """Numeric confirmation first (fast), symbolic simplification as the
    tie-breaker for domain-starved expressions."""
    try:
        with _deadline(timeout):
            derived = sp.diff(_acosh_as_log(solution), X)
        verdict = _numeric_equal(derived, problem, guard=solution, seed=seed)
        if verdict is True:
            return None
        if verdict is False:
            return "numeric mismatch between diff(solution) and problem"
        with _deadline(timeout):
            diff = _acosh_as_log(derived - problem)
            # powsimp(force=True) merges sqrt(u-1)*sqrt(u+1) -> sqrt(u^2-1),
            # the principal-real-domain convention the dataset is written in
            for candidate in (diff, sp.powsimp(diff, force=True)):
                if sp.simplify(candidate) == 0 or \
                        sp.simplify(sp.together(candidate)) == 0:
                    return None
        return "inconclusive: probes died and symbolic difference not zero"
    except _Timeout:
        return "CAS timeout"
    except Exception as exc:
        return f"CAS failure: {type(exc).__name__}: {exc}"


def _confirm_ode(problem: sp.Expr, solution: sp.Expr, order: int, timeout: float,
                 seed: int = 7) -> Optional[str]:
    try:
        with _deadline(timeout):
            d1 = sp.diff(solution, X)
            subs = {sp.Symbol("y"): solution, YPRIME: d1}
            if order >= 2:
                subs[YDOUBLEPRIME] = sp.diff(d1, X)
            residual = problem.subs(subs, simultaneous=True)
        verdict = _numeric_equal(residual, sp.Integer(0), guard=solution, seed=seed)
        if verdict is True:
            return None
        if verdict is False:
            return "residual does not vanish numerically"
        with _deadline(timeout):
            if sp.simplify(residual) == 0:
                return None
        return "inconclusive: probes died and residual not symbolically zero"
    except _Timeout:
        return "CAS timeout"
    except Exception as exc:
        return f"CAS failure: {type(exc).__name__}: {exc}"


def cross_validate(path, fraction: float = 1.0, task: str = "bwd",
                   timeout: float = 5.0, seed: int = 0) -> CrossValidationReport:
    rng = random.Random(seed)
    report = CrossValidationReport()
    order = {"ode1": 1, "ode2": 2}.get(task)
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip() or rng.random() >= fraction:
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) < 2:
                report.checked += 1
                report.transcripts.append(
                    {"line": line_no, "reason": "malformed line"})
                continue
            try:
                problem = prefix_to_sympy(parts[0])
                solution = prefix_to_sympy(parts[1])
            except ConversionError as exc:
                report.checked += 1
                report.transcripts.append(
                    {"line": line_no, "reason": f"conversion: {exc}"})
                continue
            if order is None:
                reason = _confirm_integral(problem, solution, timeout, seed=line_no)
            else:
                reason = _confirm_ode(problem, solution, order, timeout, seed=line_no)
            report.checked += 1
            if reason is None:
                report.agreed += 1
            else:
                report.transcripts.append({
                    "line": line_no,
                    "reason": reason,
                    "problem": parts[0],
                    "solution": parts[1],
                })
    return report
