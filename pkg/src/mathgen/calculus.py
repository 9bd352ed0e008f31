"""Symbolic differentiation and guarded numeric evaluation.

Evaluation never raises on mathematical failure: out-of-domain arguments,
overflow and complex-valued results come back as EvalResult variants.  The
probe compiler turns an expression into a postfix program for the repeated
evaluations done by verification and validity filtering.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from itertools import product as _iproduct
from typing import Mapping, Optional, Tuple

from .expr import (
    CONSTANTS,
    Expr,
    ONE,
    VARIABLES,
    ZERO,
    integer,
    iter_nodes,
)
from .simplify import simplify

BUILTIN_CONSTANTS = {"e": math.e, "pi": math.pi}
PROBE_CONSTANTS = ("c", "c1", "c2")


class UnsupportedOperatorError(ValueError):
    """No differentiation rule registered for the operator."""


class ProbeFailedError(ArithmeticError):
    """A finite-difference probe hit a nonfinite evaluation."""


@dataclass(frozen=True)
class EvalResult:
    kind: str  # "finite" | "nonfinite" | "complex" | "domain-error"
    value: Optional[float] = None

    @property
    def is_finite(self) -> bool:
        return self.kind == "finite"


Bindings = Mapping[str, float]


class _EvalProblem(Exception):
    def __init__(self, kind: str, value: Optional[float] = None):
        self.kind = kind
        self.value = value


def _check_finite_arg(v: float) -> float:
    if not math.isfinite(v):
        raise _EvalProblem("nonfinite", v)
    return v


def _ev_log(a: float) -> float:
    if a == 0.0:
        raise _EvalProblem("domain-error", -math.inf)
    if a < 0.0:
        raise _EvalProblem("complex")
    return math.log(a)


def _ev_sqrt(a: float) -> float:
    if a < 0.0:
        raise _EvalProblem("complex")
    return math.sqrt(a)


def _ev_asin(a: float) -> float:
    if abs(a) > 1.0:
        raise _EvalProblem("complex")
    return math.asin(a)


def _ev_acos(a: float) -> float:
    if abs(a) > 1.0:
        raise _EvalProblem("complex")
    return math.acos(a)


def _ev_acosh(a: float) -> float:
    if a < 1.0:
        raise _EvalProblem("complex")
    return math.acosh(a)


def _ev_atanh(a: float) -> float:
    if abs(a) == 1.0:
        raise _EvalProblem("nonfinite", math.copysign(math.inf, a))
    if abs(a) > 1.0:
        raise _EvalProblem("complex")
    return math.atanh(a)


def _ev_exp(a: float) -> float:
    try:
        return math.exp(a)
    except OverflowError:
        raise _EvalProblem("nonfinite", math.inf) from None


def _ev_sinh(a: float) -> float:
    try:
        return math.sinh(a)
    except OverflowError:
        raise _EvalProblem("nonfinite", math.copysign(math.inf, a)) from None


def _ev_cosh(a: float) -> float:
    try:
        return math.cosh(a)
    except OverflowError:
        raise _EvalProblem("nonfinite", math.inf) from None


_UNARY_EVAL = {
    "exp": _ev_exp,
    "log": _ev_log,
    "sqrt": _ev_sqrt,
    "sin": math.sin,
    "cos": math.cos,
    "tan": math.tan,
    "asin": _ev_asin,
    "acos": _ev_acos,
    "atan": math.atan,
    "sinh": _ev_sinh,
    "cosh": _ev_cosh,
    "tanh": math.tanh,
    "asinh": math.asinh,
    "acosh": _ev_acosh,
    "atanh": _ev_atanh,
}


def evaluate(expr: Expr, bindings: Bindings) -> EvalResult:
    """Bottom-up real evaluation.  Every free variable and c-constant must be
    bound; e and pi are built in.  Mathematical failures are values, never
    exceptions."""

    def walk(node: Expr) -> float:
        if node.op is None:
            if isinstance(node.value, int):
                try:
                    return float(node.value)
                except OverflowError:
                    raise _EvalProblem("nonfinite", math.inf) from None
            name = node.value
            if name in BUILTIN_CONSTANTS:
                return BUILTIN_CONSTANTS[name]
            return bindings[name]
        if node.op == "+":
            return walk(node.args[0]) + walk(node.args[1])
        if node.op == "-":
            return walk(node.args[0]) - walk(node.args[1])
        if node.op == "*":
            return walk(node.args[0]) * walk(node.args[1])
        if node.op == "/":
            a, b = walk(node.args[0]), walk(node.args[1])
            if b == 0.0:
                raise _EvalProblem("domain-error")
            return a / b
        if node.op == "pow":
            a, b = walk(node.args[0]), walk(node.args[1])
            _check_finite_arg(a)
            _check_finite_arg(b)
            if a < 0.0 and b != int(b):
                raise _EvalProblem("complex")
            if a == 0.0 and b < 0.0:
                raise _EvalProblem("domain-error")
            try:
                return math.pow(a, b)
            except OverflowError:
                raise _EvalProblem("nonfinite", math.inf) from None
            except ValueError:
                raise _EvalProblem("complex") from None
        fn = _UNARY_EVAL[node.op]
        return fn(_check_finite_arg(walk(node.args[0])))

    try:
        v = walk(expr)
    except _EvalProblem as p:
        return EvalResult(p.kind, p.value)
    if math.isnan(v):
        return EvalResult("nonfinite", v)
    if not math.isfinite(v):
        return EvalResult("nonfinite", v)
    return EvalResult("finite", v)


# Validity filter --------------------------------------------------------------

def is_valid_expression(expr: Expr, constant_values: Tuple[float, ...] = (0.5, 1.0, 2.0)) -> bool:
    """True iff every maximal variable-free subtree evaluates to a finite real,
    and no division has a variable-free denominator equal to zero (u / 0 never
    evaluates anywhere even though the subtree "0" itself is finite).
    c/c1/c2 are probed over ``constant_values`` (positive by default)."""

    def has_var(node: Expr) -> bool:
        return any(n.is_symbol and n.value in VARIABLES for n in iter_nodes(node))

    def eval_grid(node: Expr):
        consts = sorted({n.value for n in iter_nodes(node)
                         if n.is_symbol and n.value in PROBE_CONSTANTS})
        if not consts:
            yield evaluate(node, {})
            return
        for combo in _iproduct(constant_values, repeat=len(consts)):
            yield evaluate(node, dict(zip(consts, combo)))

    def check_constant_subtree(node: Expr) -> bool:
        return all(r.is_finite for r in eval_grid(node))

    def walk(node: Expr) -> bool:
        if not has_var(node):
            return check_constant_subtree(node)
        if node.op == "/" and not has_var(node.args[1]):
            if any(r.is_finite and r.value == 0.0 for r in eval_grid(node.args[1])):
                return False
        return all(walk(child) for child in node.args)

    return walk(expr)


# Differentiation --------------------------------------------------------------

def _mul(a: Expr, b: Expr) -> Expr:
    if a.is_int(0) or b.is_int(0):
        return ZERO
    if a.is_int(1):
        return b
    if b.is_int(1):
        return a
    return Expr("*", (a, b))


def _add(a: Expr, b: Expr) -> Expr:
    if a.is_int(0):
        return b
    if b.is_int(0):
        return a
    return Expr("+", (a, b))


def _sub(a: Expr, b: Expr) -> Expr:
    if b.is_int(0):
        return a
    if a.is_int(0):
        return _neg(b)
    return Expr("-", (a, b))


def _neg(a: Expr) -> Expr:
    if a.is_integer:
        return integer(-a.value)
    return Expr("*", (integer(-1), a))


def _div(a: Expr, b: Expr) -> Expr:
    if a.is_int(0):
        return ZERO
    if b.is_int(1):
        return a
    return Expr("/", (a, b))


def _sq(a: Expr) -> Expr:
    return Expr("*", (a, a))


def _d_pow(f: Expr, g: Expr, df: Expr, dg: Expr) -> Expr:
    if g.is_integer:
        k = g.value
        if k == 0:
            return ZERO
        fk1 = f if k == 2 else Expr("pow", (f, integer(k - 1))) if k != 1 else ONE
        return _mul(integer(k), _mul(fk1, df))
    node = Expr("pow", (f, g))
    if dg.is_int(0):
        return _mul(g, _mul(Expr("pow", (f, _sub(g, ONE))), df))
    if df.is_int(0):
        return _mul(node, _mul(Expr("log", (f,)), dg))
    return _mul(node, _add(_mul(dg, Expr("log", (f,))), _mul(g, _div(df, f))))


def derivative_with(expr: Expr, dmap: Mapping[str, Expr]) -> Expr:
    """Derivative under a symbol-derivative map (chain rule through symbols);
    symbols absent from the map are treated as constants.  Result is raw
    (not simplified)."""
    if expr.op is None:
        if expr.is_symbol and expr.value in dmap:
            return dmap[expr.value]
        return ZERO
    if expr.op in ("+", "-"):
        da = derivative_with(expr.args[0], dmap)
        db = derivative_with(expr.args[1], dmap)
        return _add(da, db) if expr.op == "+" else _sub(da, db)
    if expr.op == "*":
        a, b = expr.args
        da, db = derivative_with(a, dmap), derivative_with(b, dmap)
        return _add(_mul(da, b), _mul(a, db))
    if expr.op == "/":
        a, b = expr.args
        da, db = derivative_with(a, dmap), derivative_with(b, dmap)
        if db.is_int(0):
            return _div(da, b)
        return _div(_sub(_mul(da, b), _mul(a, db)), _sq(b))
    if expr.op == "pow":
        f, g = expr.args
        return _d_pow(f, g, derivative_with(f, dmap), derivative_with(g, dmap))

    a = expr.args[0]
    da = derivative_with(a, dmap)
    if da.is_int(0):
        return ZERO
    op = expr.op
    if op == "exp":
        return _mul(Expr("exp", (a,)), da)
    if op == "log":
        return _div(da, a)
    if op == "sqrt":
        return _div(da, _mul(integer(2), Expr("sqrt", (a,))))
    if op == "sin":
        return _mul(Expr("cos", (a,)), da)
    if op == "cos":
        return _neg(_mul(Expr("sin", (a,)), da))
    if op == "tan":
        return _mul(_add(ONE, _sq(Expr("tan", (a,)))), da)
    if op == "asin":
        return _div(da, Expr("sqrt", (_sub(ONE, _sq(a)),)))
    if op == "acos":
        return _neg(_div(da, Expr("sqrt", (_sub(ONE, _sq(a)),))))
    if op == "atan":
        return _div(da, _add(ONE, _sq(a)))
    if op == "sinh":
        return _mul(Expr("cosh", (a,)), da)
    if op == "cosh":
        return _mul(Expr("sinh", (a,)), da)
    if op == "tanh":
        return _mul(_sub(ONE, _sq(Expr("tanh", (a,)))), da)
    if op == "asinh":
        return _div(da, Expr("sqrt", (_add(_sq(a), ONE),)))
    if op == "acosh":
        return _div(da, Expr("sqrt", (_sub(_sq(a), ONE),)))
    if op == "atanh":
        return _div(da, _sub(ONE, _sq(a)))
    raise UnsupportedOperatorError(f"no derivative rule for {op!r}")


def differentiate(expr: Expr, var: str, simplified: bool = True) -> Expr:
    """Exact symbolic derivative with respect to ``var``."""
    d = derivative_with(expr, {var: ONE})
    return simplify(d) if simplified else d


def finite_difference(expr: Expr, var: str, point: float, h: Optional[float] = None,
                      extra: Optional[Bindings] = None) -> float:
    """Central difference (f(x+h) - f(x-h)) / 2h, the derivative test oracle."""
    if h is None:
        h = 1e-5 * max(1.0, abs(point))
    base = dict(extra or {})
    hi = evaluate(expr, {**base, var: point + h})
    lo = evaluate(expr, {**base, var: point - h})
    if not (hi.is_finite and lo.is_finite):
        raise ProbeFailedError(f"nonfinite evaluation near {var}={point}")
    return (hi.value - lo.value) / (2.0 * h)


# Probe compiler ----------------------------------------------------------------

_B_ADD, _B_SUB, _B_MUL, _B_DIV, _B_POW = 2, 3, 4, 5, 6
_C_CONST, _C_VAR, _C_UNARY = 0, 1, 7

_UNARY_RAW = {
    "exp": math.exp, "log": math.log, "sqrt": math.sqrt,
    "sin": math.sin, "cos": math.cos, "tan": math.tan,
    "asin": math.asin, "acos": math.acos, "atan": math.atan,
    "sinh": math.sinh, "cosh": math.cosh, "tanh": math.tanh,
    "asinh": math.asinh, "acosh": math.acosh, "atanh": math.atanh,
}

_BINARY_CODE = {"+": _B_ADD, "-": _B_SUB, "*": _B_MUL, "/": _B_DIV, "pow": _B_POW}


def compile_probe(expr: Expr):
    """Postfix program for fast repeated evaluation; see evaluate_probe."""
    program = []
    stack = [(expr, False)]
    while stack:
        node, seen = stack.pop()
        if node.op is None:
            if isinstance(node.value, int):
                try:
                    v = float(node.value)
                except OverflowError:
                    v = math.inf
                program.append((_C_CONST, v))
            elif node.value in BUILTIN_CONSTANTS:
                program.append((_C_CONST, BUILTIN_CONSTANTS[node.value]))
            else:
                program.append((_C_VAR, node.value))
            continue
        if not seen:
            stack.append((node, True))
            stack.extend((a, False) for a in reversed(node.args))
        else:
            if node.op in _BINARY_CODE:
                program.append((_BINARY_CODE[node.op], None))
            else:
                program.append((_C_UNARY, _UNARY_RAW[node.op]))
    return program


def evaluate_probe(program, bindings: Bindings) -> Tuple[Optional[float], float]:
    """Run a compiled program; returns (value, max |subvalue|), or (None, inf)
    when the probe dies on a domain error, overflow or NaN."""
    stack = []
    push = stack.append
    pop = stack.pop
    mx = 0.0
    try:
        for code, payload in program:
            if code == _C_CONST:
                v = payload
            elif code == _C_VAR:
                v = bindings[payload]
            elif code == _C_UNARY:
                v = payload(pop())
            elif code == _B_ADD:
                b = pop()
                v = pop() + b
            elif code == _B_SUB:
                b = pop()
                v = pop() - b
            elif code == _B_MUL:
                b = pop()
                v = pop() * b
            elif code == _B_DIV:
                b = pop()
                v = pop() / b
            else:
                b = pop()
                a = pop()
                if a < 0.0 and b != int(b):
                    return None, math.inf
                v = math.pow(a, b)
            push(v)
            av = v if v >= 0.0 else -v
            if av > mx:
                mx = av
    except (ValueError, OverflowError, ZeroDivisionError):
        return None, math.inf
    v = stack[0]
    if not math.isfinite(v):
        return None, math.inf
    return v, mx


def draw_probe_point(rng: random.Random, low: float = 1e-2, high: float = 10.0) -> float:
    """Magnitude log-uniform over [low, high], random sign."""
    mag = 10.0 ** rng.uniform(math.log10(low), math.log10(high))
    return mag if rng.random() < 0.5 else -mag
