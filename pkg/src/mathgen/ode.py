"""First- and second-order differential-equation dataset generation.

Pipeline: sample a function, plant integration constants into leaves, isolate
a constant by inverting the operator path to it, differentiate totally in x
(dy/dx = y', dy'/dx = y''), then simplify, absorb constants and normalize the
equation.  Emitted solutions are re-verified against their equations; stage
failures are counted, never raised.
"""

from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterator, List, Optional, Tuple

from .calculus import derivative_with, evaluate, is_valid_expression
from .datasets import Example, MAX_TOKENS
from .expr import (
    Expr,
    GrammarConfig,
    ONE,
    ZERO,
    free_constants,
    free_variables,
    integer,
    leaf_paths,
    replace_at,
    substitute,
    symbol,
    symbol_count,
    token_length,
)
from .sampling import build_tables, sample_expression
from .simplify import (
    NoFactorRemainsError,
    _signed_terms,
    reduce_constants,
    simplify,
)
from .verify import ProbeConfig, check_ode

_TOTAL_DERIVS = {"x": ONE, "y": symbol("y'"), "y'": symbol("y''")}


class NotInvertiblePathError(ValueError):
    """An operator on the path to the target has no usable inverse there."""


class MultipleOccurrencesError(ValueError):
    """The target symbol does not occur exactly once."""


@dataclass(frozen=True)
class SolvedForm:
    target: str
    expression: Expr
    path_ops: Tuple[str, ...]


@dataclass(frozen=True)
class OdeExample:
    equation: Expr
    solution: Expr
    order: int

    def as_example(self) -> Example:
        return Example(self.equation, self.solution, f"ode{self.order}")


def total_derivative(expr: Expr) -> Expr:
    """d/dx treating y as y(x): y -> y', y' -> y''."""
    return simplify(derivative_with(expr, _TOTAL_DERIVS))


def plant_constant(f: Expr, name: str, rng: random.Random) -> Expr:
    """Replace one uniformly chosen leaf by the constant symbol."""
    paths = leaf_paths(f)
    if not paths:
        raise ValueError("expression has no leaves")
    return replace_at(f, paths[rng.randrange(len(paths))], symbol(name))


_INVERSE_UNARY = {
    "exp": "log", "log": "exp",
    "sin": "asin", "asin": "sin",
    "cos": "acos", "acos": "cos",
    "tan": "atan", "atan": "tan",
    "sinh": "asinh", "asinh": "sinh",
    "cosh": "acosh", "acosh": "cosh",
    "tanh": "atanh", "atanh": "tanh",
}


def _invert_step(node: Expr, child_index: int, rhs: Expr) -> Expr:
    """Solve node == rhs for the child at child_index."""
    op = node.op
    if op in _INVERSE_UNARY:
        return Expr(_INVERSE_UNARY[op], (rhs,))
    if op == "sqrt":
        return Expr("*", (rhs, rhs))
    if op == "+":
        other = node.args[1 - child_index]
        return Expr("-", (rhs, other))
    if op == "-":
        if child_index == 0:
            return Expr("+", (rhs, node.args[1]))
        return Expr("-", (node.args[0], rhs))
    if op == "*":
        other = node.args[1 - child_index]
        return Expr("/", (rhs, other))
    if op == "/":
        if child_index == 0:
            return Expr("*", (rhs, node.args[1]))
        return Expr("/", (node.args[0], rhs))
    if op == "pow":
        if child_index == 1:
            raise NotInvertiblePathError("target in a pow exponent")
        exponent = node.args[1]
        if not exponent.is_integer or exponent.value == 0:
            raise NotInvertiblePathError("pow with non-integer exponent on path")
        k = exponent.value
        if k == 1:
            return rhs
        if k == 2:
            return Expr("sqrt", (rhs,))
        if k == -1:
            return Expr("/", (ONE, rhs))
        return Expr("pow", (rhs, Expr("/", (ONE, integer(k)))))
    raise NotInvertiblePathError(f"no inverse for {op!r}")


def _path_to_symbol(expr: Expr, name: str) -> Tuple[int, ...]:
    count = symbol_count(expr, name)
    if count != 1:
        raise MultipleOccurrencesError(f"{name} occurs {count} times")

    def walk(node: Expr, path: tuple):
        if node.is_symbol and node.value == name:
            return path
        for i, child in enumerate(node.args):
            if symbol_count(child, name):
                return walk(child, path + (i,))
        return None

    return walk(expr, ())


def _roundtrip_ok(lhs: Expr, target: str, placeholder: str, solved: Expr,
                  rng: random.Random, needed: int = 3, tries: int = 12,
                  tol: float = 1e-6) -> bool:
    """Substituting lhs's value back into the solved form must reproduce the
    target at surviving probe points."""
    names = sorted((free_variables(lhs) | free_constants(lhs)) - {"e", "pi"})
    survivors = 0
    for _ in range(tries):
        bind = {nm: rng.uniform(0.2, 2.0) for nm in names}
        v = evaluate(lhs, bind)
        if not v.is_finite:
            continue
        back = evaluate(solved, {**bind, placeholder: v.value})
        if not back.is_finite:
            continue
        if abs(back.value - bind[target]) > tol * (1.0 + abs(bind[target])):
            return False
        survivors += 1
        if survivors >= needed:
            return True
    return False


def solve_for_symbol(lhs: Expr, target: str, value: Expr,
                     rng: Optional[random.Random] = None) -> SolvedForm:
    """Isolate ``target`` in the equation lhs == value by inverting the
    operator path to its single occurrence; verified by a numeric round trip.
    """
    path = _path_to_symbol(lhs, target)
    used = free_variables(lhs) | free_constants(lhs) | free_variables(value) \
        | free_constants(value)
    placeholder = next(nm for nm in ("z", "y", "x", "c2", "c1", "c")
                       if nm not in used and nm != target)
    node = lhs
    rhs: Expr = symbol(placeholder)
    ops: List[str] = []
    for step in path:
        rhs = _invert_step(node, step, rhs)
        ops.append(node.op)
        node = node.args[step]
    if rng is not None and not _roundtrip_ok(lhs, target, placeholder, rhs, rng):
        raise NotInvertiblePathError("round-trip verification failed")
    solved = simplify(substitute(simplify(rhs), {placeholder: value}))
    return SolvedForm(target=target, expression=solved, path_ops=tuple(ops))


def _collect_linear(eq: Expr, name: str) -> Optional[Expr]:
    """If eq is additively linear in the constant (eq = c*P + Q with each term
    containing c at most once as a direct factor), return c = -Q/P."""
    sym = symbol(name)
    p_terms: List[Tuple[int, Expr]] = []
    q_terms: List[Tuple[int, Expr]] = []
    for sign, term in _signed_terms(eq):
        cnt = symbol_count(term, name)
        if cnt == 0:
            q_terms.append((sign, term))
            continue
        if cnt > 1:
            return None
        # strip one factor equal to the constant from the term's product
        factors: List[Expr] = []

        def collect(node: Expr):
            if node.op == "*":
                collect(node.args[0])
                collect(node.args[1])
            else:
                factors.append(node)

        collect(term)
        if sym not in factors:
            return None  # c sits under a nonlinear operator
        factors.remove(sym)
        rest = ONE
        for fct in factors:
            rest = Expr("*", (rest, fct))
        p_terms.append((sign, rest))
    if not p_terms:
        return None

    def chain(terms: List[Tuple[int, Expr]]) -> Expr:
        out: Optional[Expr] = None
        for sign, t in terms:
            t = t if sign > 0 else Expr("*", (integer(-1), t))
            out = t if out is None else Expr("+", (out, t))
        return out if out is not None else ZERO

    p = chain(p_terms)
    q = chain(q_terms)
    return simplify(Expr("/", (Expr("*", (integer(-1), q)), p)))


@dataclass
class OdeGenOptions:
    min_ops: int = 1
    max_ops: Optional[int] = None
    max_tokens: int = MAX_TOKENS
    max_consecutive_rejects: int = 10_000
    probes: Optional[ProbeConfig] = None
    counters: Counter = field(default_factory=Counter)


def ode1_from_function(fc: Expr, rng: random.Random,
                       counters: Optional[Counter] = None) -> Optional[OdeExample]:
    """Build a first-order example from a function of x containing c once."""
    counters = counters if counters is not None else Counter()
    if symbol_count(fc, "c") != 1:
        counters["ode1_bad_plant"] += 1
        return None
    try:
        solved = solve_for_symbol(fc, "c", symbol("y"), rng)
    except (NotInvertiblePathError, MultipleOccurrencesError):
        counters["ode1_not_invertible"] += 1
        return None
    equation_raw = total_derivative(solved.expression)
    try:
        equation = _normalize(equation_raw)
    except NoFactorRemainsError:
        counters["ode1_degenerate"] += 1
        return None
    if "y'" not in free_variables(equation) or free_constants(equation) & {"c", "c1", "c2"}:
        counters["ode1_degenerate"] += 1
        return None
    solution = reduce_constants(simplify(fc), ("c",))
    if symbol_count(solution, "c") == 0:
        counters["ode1_degenerate"] += 1
        return None
    return OdeExample(equation, solution, 1)


def _normalize(eq: Expr) -> Expr:
    from .simplify import normalize_equation
    return normalize_equation(eq)


def ode2_from_function(f: Expr, rng: random.Random,
                       counters: Optional[Counter] = None) -> Optional[OdeExample]:
    """Build a second-order example from a function of x containing c1 and c2.
    c2 must occur exactly once; the intermediate equation is skipped when it
    cannot be solved in c1 (the skip rate is reported by the generator)."""
    counters = counters if counters is not None else Counter()
    if symbol_count(f, "c2") != 1 or symbol_count(f, "c1") == 0:
        counters["ode2_bad_plant"] += 1
        return None
    try:
        solved2 = solve_for_symbol(f, "c2", symbol("y"), rng)
    except (NotInvertiblePathError, MultipleOccurrencesError):
        counters["ode2_c2_not_invertible"] += 1
        return None
    eq1 = total_derivative(solved2.expression)

    counters["ode2_c1_attempts"] += 1
    g = _solve_c1(eq1, rng, counters)
    if g is None:
        counters["ode2_c1_skipped"] += 1
        return None
    counters["ode2_c1_solved"] += 1

    eq2_raw = total_derivative(g)
    try:
        equation = _normalize(eq2_raw)
    except NoFactorRemainsError:
        counters["ode2_degenerate"] += 1
        return None
    if "y''" not in free_variables(equation) or \
            free_constants(equation) & {"c", "c1", "c2"}:
        counters["ode2_degenerate"] += 1
        return None
    solution = reduce_constants(simplify(f), ("c1", "c2"))
    if symbol_count(solution, "c1") == 0 or symbol_count(solution, "c2") == 0:
        counters["ode2_degenerate"] += 1
        return None
    return OdeExample(equation, solution, 2)


def _solve_c1(eq1: Expr, rng: random.Random, counters: Counter) -> Optional[Expr]:
    """c1 = G(x, y, y') from the intermediate equation eq1 == 0, or None."""
    occurrences = symbol_count(eq1, "c1")
    if occurrences == 0:
        counters["ode2_c1_absent"] += 1
        return None
    candidates = [eq1]
    try:
        normalized = _normalize(eq1)
        if normalized not in candidates and symbol_count(normalized, "c1"):
            candidates.append(normalized)
    except NoFactorRemainsError:
        pass
    if occurrences > 1:
        reduced = reduce_constants(eq1, ("c1",))
        if reduced not in candidates and symbol_count(reduced, "c1"):
            candidates.append(reduced)
    for candidate in candidates:
        cnt = symbol_count(candidate, "c1")
        if cnt == 1:
            try:
                return solve_for_symbol(candidate, "c1", ZERO, rng).expression
            except (NotInvertiblePathError, MultipleOccurrencesError):
                continue
        if cnt > 1:
            linear = _collect_linear(candidate, "c1")
            if linear is not None:
                return linear
    return None


def _emit_ode(count: int, order: int, config: GrammarConfig, rng: random.Random,
              opts: OdeGenOptions, attempts_budget: Optional[int] = None
              ) -> Iterator[Example]:
    table = build_tables(config, opts.max_ops or config.max_internal_nodes)
    seen = set()
    emitted = 0
    consecutive = 0
    while emitted < count:
        if attempts_budget is not None and opts.counters["attempts"] >= attempts_budget:
            return
        if consecutive >= opts.max_consecutive_rejects:
            raise RuntimeError(
                f"ODE generation stalled; counters: {dict(opts.counters)}")
        consecutive += 1
        opts.counters["attempts"] += 1
        n = rng.randint(opts.min_ops, opts.max_ops or config.max_internal_nodes)
        f = sample_expression(n, config, table, rng)
        if order == 1:
            planted = plant_constant(f, "c", rng)
        else:
            paths = leaf_paths(f)
            if len(paths) < 2:
                opts.counters["reject_too_small"] += 1
                continue
            i, j = rng.sample(range(len(paths)), 2)
            planted = replace_at(f, paths[i], symbol("c1"))
            planted = replace_at(planted, paths[j], symbol("c2"))
        if not is_valid_expression(planted):
            opts.counters["reject_invalid"] += 1
            continue
        made = (ode1_from_function if order == 1 else ode2_from_function)(
            planted, rng, opts.counters)
        if made is None:
            continue
        if token_length(made.equation) > opts.max_tokens or \
                token_length(made.solution) > opts.max_tokens:
            opts.counters["reject_too_long"] += 1
            continue
        if not is_valid_expression(made.equation) or \
                not is_valid_expression(made.solution):
            opts.counters["reject_invalid"] += 1
            continue
        example = made.as_example()
        key = example.key()
        if key in seen:
            opts.counters["reject_duplicate"] += 1
            continue
        if not check_ode(made.equation, made.solution, order, opts.probes).ok:
            opts.counters["reject_unverified"] += 1
            continue
        seen.add(key)
        emitted += 1
        consecutive = 0
        opts.counters["emitted"] += 1
        yield example


def gen_ode1(count: int, config: GrammarConfig, rng: random.Random,
             opts: Optional[OdeGenOptions] = None) -> Iterator[Example]:
    yield from _emit_ode(count, 1, config, rng, opts or OdeGenOptions())


def gen_ode2(count: int, config: GrammarConfig, rng: random.Random,
             opts: Optional[OdeGenOptions] = None,
             attempts_budget: Optional[int] = None) -> Iterator[Example]:
    yield from _emit_ode(count, 2, config, rng, opts or OdeGenOptions(),
                         attempts_budget)
