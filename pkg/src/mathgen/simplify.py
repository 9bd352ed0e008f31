"""Canonicalizing rewrites: strict simplification, integration-constant
absorption, and normalization of equation left-hand sides.

The rule set is closed and auditable (see rules_manifest).  Strict rules
preserve value at every valid binding.  Constant-reparametrization rules
replace an expression family by an equivalent one up to a change of the
integration constant and record the witness.  Assumption-based rules are
applied only on the coefficient-reduction path and carry their assumption.

Canonical form after simplify():
  * sums and products are flattened, grouped, ordered, then re-associated to
    the right; integer parts fold into a single coefficient (first factor in
    products, last term in sums);
  * sum terms are ranked y'' before y' before y before variable terms before
    symbolic constants before integers, so equation left sides read naturally;
  * rationals reduce; division by an integer stays a division node.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

from .expr import (
    Expr,
    ONE,
    VARIABLES,
    ZERO,
    free_variables,
    integer,
    iter_nodes,
    symbol,
    symbol_count,
    to_prefix,
)

_MAX_PASSES = 50

PROBE_CONSTANT_NAMES = ("c", "c1", "c2")


class NoFactorRemainsError(ValueError):
    """Equation normalization removed everything; the equation is degenerate."""


@dataclass
class SimplifyReport:
    input_tokens: int
    output_tokens: int
    rules_fired: Dict[str, int] = field(default_factory=dict)
    passes: int = 0


@dataclass(frozen=True)
class RuleRecord:
    name: str
    pattern: str
    replacement: str
    klass: str  # strict | constant-reparametrization | assumption-based
    assumption: str = ""


RULES: Tuple[RuleRecord, ...] = (
    RuleRecord("fold-int", "k1 (+|-|*) k2", "k3", "strict"),
    RuleRecord("fold-rational", "k1 / k2", "reduced fraction", "strict"),
    RuleRecord("add-zero", "u + 0", "u", "strict"),
    RuleRecord("mul-one", "u * 1", "u", "strict"),
    RuleRecord("mul-zero", "u * 0", "0", "strict"),
    RuleRecord("div-one", "u / 1", "u", "strict"),
    RuleRecord("sub-self", "u - u", "0", "strict"),
    RuleRecord("div-self", "u / u", "1", "strict", "u is not the literal 0"),
    RuleRecord("div-zero-num", "0 / u", "0", "strict", "u is not the literal 0"),
    RuleRecord("div-nested", "(a/b)/c or a/(b/c)", "single quotient", "strict"),
    RuleRecord("div-coeff-gcd", "(k1*u) / k2", "gcd-reduced quotient", "strict"),
    RuleRecord("sign-fold", "-1 * -1 * u", "u", "strict"),
    RuleRecord("pow-zero", "u pow 0", "1", "strict"),
    RuleRecord("pow-one", "u pow 1", "u", "strict"),
    RuleRecord("pow-int", "k1 pow k2 (small)", "k3", "strict"),
    RuleRecord("pow-pow-int", "(u pow k1) pow k2", "u pow k1*k2", "strict"),
    RuleRecord("pow-base-one", "1 pow u", "1", "strict"),
    RuleRecord("unary-exact", "f(0) / f(1) exact values", "integer", "strict"),
    RuleRecord("sqrt-perfect-square", "sqrt(k^2)", "k (k >= 0)", "strict"),
    RuleRecord("log-exp", "log(exp(u))", "u", "strict"),
    RuleRecord("sinh-asinh", "sinh(asinh(u)) / asinh(sinh(u))", "u", "strict"),
    RuleRecord("tanh-atanh", "tanh(atanh(u)) / atanh(tanh(u))", "u", "strict"),
    RuleRecord("tan-atan", "tan(atan(u))", "u", "strict"),
    RuleRecord("exp-merge", "exp(u) * exp(v)", "exp(u + v)", "strict"),
    RuleRecord("collect-int-coeff", "k1*u + k2*u", "(k1+k2)*u", "strict"),
    RuleRecord("sin2-cos2", "k*sin(u)^2 + k*cos(u)^2", "k", "strict"),
    RuleRecord("canonical-order", "commutative chain", "sorted right-assoc chain", "strict",
               "order-only; part of the dataset's canonical form"),
    RuleRecord("const-collapse", "g(c) with c only inside and no variables", "c",
               "constant-reparametrization", "new c = g(old c); range may widen"),
    RuleRecord("const-absorb-sum", "(c + a)*u + ... with a free of variables", "c*u + ...",
               "constant-reparametrization", "new c = old c + a"),
    RuleRecord("const-absorb-prod", "c * a * u with a free of variables", "c*u",
               "constant-reparametrization", "new c = old c * a"),
    RuleRecord("log-power", "log(u^k) or log(u*u)", "k*log(u)",
               "assumption-based", "assumes u > 0"),
    RuleRecord("drop-positive-factor", "p * u = 0 with p provably positive", "u = 0",
               "assumption-based", "zero set preserved; equation path only"),
    RuleRecord("sign-normalize", "leading term negative", "negated equation",
               "assumption-based", "zero set preserved; equation path only"),
)


def rules_manifest() -> str:
    """Reviewable text manifest of the rewrite rules (one line per rule)."""
    lines = []
    for r in RULES:
        extra = f"  [{r.assumption}]" if r.assumption else ""
        lines.append(f"{r.name:24s} {r.klass:28s} {r.pattern}  ->  {r.replacement}{extra}")
    return "\n".join(lines) + "\n"


# Ordering ---------------------------------------------------------------------

def sort_key(e: Expr):
    if e.op is None:
        if isinstance(e.value, int):
            return (0, "", e.value)
        return (1, e.value, 0)
    if len(e.args) == 1:
        return (2, e.op, sort_key(e.args[0]))
    return (3, e.op, sort_key(e.args[0]), sort_key(e.args[1]))


def _term_rank(rest: Optional[Expr]) -> int:
    if rest is None:
        return 5
    vs = free_variables(rest)
    if "y''" in vs:
        return 0
    if "y'" in vs:
        return 1
    if "y" in vs:
        return 2
    if vs:
        return 3
    return 4


# The simplifier ----------------------------------------------------------------

_EXACT_UNARY_FOLDS = {
    ("exp", 0): 1, ("log", 1): 0,
    ("sin", 0): 0, ("cos", 0): 1, ("tan", 0): 0,
    ("asin", 0): 0, ("acos", 1): 0, ("atan", 0): 0,
    ("sinh", 0): 0, ("cosh", 0): 1, ("tanh", 0): 0,
    ("asinh", 0): 0, ("acosh", 1): 0, ("atanh", 0): 0,
}

_INVERSE_PAIRS = {
    ("log", "exp"): "log-exp",
    ("sinh", "asinh"): "sinh-asinh",
    ("asinh", "sinh"): "sinh-asinh",
    ("tanh", "atanh"): "tanh-atanh",
    ("atanh", "tanh"): "tanh-atanh",
    ("tan", "atan"): "tan-atan",
}


class Simplifier:
    def __init__(self):
        self.fired: Counter = Counter()

    def run(self, expr: Expr) -> Tuple[Expr, int]:
        passes = 0
        while passes < _MAX_PASSES:
            out = self._node(expr)
            passes += 1
            if out == expr:
                return out, passes
            expr = out
        return expr, passes

    # -- dispatch ---------------------------------------------------------

    def _node(self, e: Expr) -> Expr:
        if e.op is None:
            return e
        if e.op in ("+", "-"):
            return self._sum(e)
        if e.op == "*":
            return self._product(e)
        if e.op == "/":
            return self._quotient(self._node(e.args[0]), self._node(e.args[1]))
        if e.op == "pow":
            return self._power(self._node(e.args[0]), self._node(e.args[1]))
        return self._unary(e.op, self._node(e.args[0]))

    # -- sums ---------------------------------------------------------------

    def _sum(self, e: Expr) -> Expr:
        signed: List[Tuple[int, Expr]] = []

        def collect(node: Expr, sign: int):
            if node.op == "+":
                collect(node.args[0], sign)
                collect(node.args[1], sign)
            elif node.op == "-":
                collect(node.args[0], sign)
                collect(node.args[1], -sign)
            else:
                signed.append((sign, self._node(node)))

        collect(e.args[0], 1)
        collect(e.args[1], -1 if e.op == "-" else 1)

        groups: Dict[Optional[Expr], Fraction] = {}
        const = Fraction(0)
        for sign, term in signed:
            # terms produced by _node are canonical; re-flatten nested sums
            if term.op in ("+", "-"):
                for coeff, rest in _flatten_sum_terms(term):
                    if rest is None:
                        const += sign * coeff
                    else:
                        groups[rest] = groups.get(rest, Fraction(0)) + sign * coeff
                continue
            coeff, rest = _split_rat_coeff(term)
            if rest is None:
                const += sign * coeff
            else:
                k = groups.get(rest)
                groups[rest] = (k if k is not None else Fraction(0)) + sign * coeff
                if k is not None:
                    self.fired["collect-int-coeff"] += 1

        const += self._fold_sin2_cos2(groups)

        terms = [(coeff, rest) for rest, coeff in groups.items() if coeff != 0]
        terms.sort(key=lambda t: (_term_rank(t[1]), sort_key(t[1])))
        if const != 0:
            terms.append((const, None))
        out = _emit_sum(terms)
        if out != e:
            self.fired["canonical-order"] += 1
        return out

    def _fold_sin2_cos2(self, groups: Dict[Optional[Expr], Fraction]) -> Fraction:
        gained = Fraction(0)
        for key in [k for k in groups if k is not None and _is_trig_square(k, "sin")]:
            inner = _trig_square_arg(key)
            partner = _trig_square_partner(key, "cos")
            if partner in groups and inner is not None:
                a, b = groups[key], groups[partner]
                if a == b and a != 0:
                    del groups[key]
                    del groups[partner]
                    gained += a
                    self.fired["sin2-cos2"] += 1
        return gained

    # -- products -------------------------------------------------------------

    def _product(self, e: Expr) -> Expr:
        factors: List[Expr] = []
        coeff = 1
        denom = 1  # integer denominators lifted out of quotient factors

        def collect(node: Expr):
            nonlocal coeff
            if node.op == "*":
                collect(node.args[0])
                collect(node.args[1])
                return
            node = self._node(node) if node.op is not None else node
            collect_canonical(node)

        def collect_canonical(node: Expr):
            nonlocal coeff, denom
            if node.op == "*":
                collect_canonical(node.args[0])
                collect_canonical(node.args[1])
            elif node.is_integer:
                coeff *= node.value
            elif node.op == "/" and node.args[1].is_integer and node.args[1].value != 0:
                denom *= node.args[1].value
                collect_canonical(node.args[0])
            else:
                factors.append(node)

        collect(e.args[0])
        collect(e.args[1])

        if coeff == 0:
            return ZERO

        exps = [f for f in factors if f.op == "exp"]
        if len(exps) >= 2:
            rest = [f for f in factors if f.op != "exp"]
            merged_arg = exps[0].args[0]
            for other in exps[1:]:
                merged_arg = Expr("+", (merged_arg, other.args[0]))
            merged = self._unary("exp", self._node(merged_arg))
            self.fired["exp-merge"] += 1
            if merged.is_integer:
                coeff *= merged.value
                factors = rest
            else:
                factors = rest + [merged]

        factors.sort(key=sort_key)
        if denom != 1:
            self.fired["div-nested"] += 1
            return self._quotient(_emit_product(coeff, factors), integer(denom))
        out = _emit_product(coeff, factors)
        if out != e:
            self.fired["canonical-order"] += 1
        return out

    # -- quotients --------------------------------------------------------------

    def _quotient(self, n: Expr, d: Expr) -> Expr:
        if d.is_integer and n.is_integer:
            if d.value == 0:
                return Expr("/", (n, d))
            g = math.gcd(n.value, d.value)
            num, den = n.value // g, d.value // g
            if den < 0:
                num, den = -num, -den
            self.fired["fold-rational"] += 1
            return integer(num) if den == 1 else Expr("/", (integer(num), integer(den)))
        if n.is_int(0):
            if not d.is_int(0):
                self.fired["div-zero-num"] += 1
                return ZERO
        if d.is_int(1):
            self.fired["div-one"] += 1
            return n
        if d.is_int(-1):
            return self._product(Expr("*", (integer(-1), n)))
        if n == d and not n.is_int(0):
            self.fired["div-self"] += 1
            return ONE
        if n.op == "/":
            self.fired["div-nested"] += 1
            return self._quotient(n.args[0], self._product(Expr("*", (n.args[1], d))))
        if d.op == "/":
            self.fired["div-nested"] += 1
            return self._quotient(self._product(Expr("*", (n, d.args[1]))), d.args[0])

        ncoeff, nfactors = _product_parts(n)
        dcoeff, dfactors = _product_parts(d)
        changed = False
        # cancel identical factors (strict on the expression's domain)
        if dfactors:
            ncounter = Counter(nfactors)
            dcounter = Counter(dfactors)
            common = ncounter & dcounter
            if common:
                ncounter -= common
                dcounter -= common
                nfactors = sorted(ncounter.elements(), key=sort_key)
                dfactors = sorted(dcounter.elements(), key=sort_key)
                changed = True
                self.fired["div-self"] += 1
        g = math.gcd(ncoeff, dcoeff)
        if g > 1:
            ncoeff //= g
            dcoeff //= g
            changed = True
            self.fired["div-coeff-gcd"] += 1
        if dcoeff < 0:
            ncoeff, dcoeff = -ncoeff, -dcoeff
            changed = True
        if dcoeff == 1 and not dfactors:
            return _emit_product(ncoeff, nfactors)
        if changed:
            return Expr("/", (_emit_product(ncoeff, nfactors),
                              _emit_product(dcoeff, dfactors)))
        return Expr("/", (n, d))

    # -- powers -------------------------------------------------------------------

    def _power(self, b: Expr, ex: Expr) -> Expr:
        if ex.is_int(0):
            self.fired["pow-zero"] += 1
            return ONE
        if ex.is_int(1):
            self.fired["pow-one"] += 1
            return b
        if b.is_int(1):
            self.fired["pow-base-one"] += 1
            return ONE
        if b.is_integer and ex.is_integer:
            k = ex.value
            if 0 <= k <= 16:
                self.fired["pow-int"] += 1
                return integer(b.value ** k)
            if -16 <= k < 0 and b.value != 0:
                self.fired["pow-int"] += 1
                return self._quotient(ONE, integer(b.value ** (-k)))
        if b.op == "pow" and b.args[1].is_integer and ex.is_integer:
            self.fired["pow-pow-int"] += 1
            return self._power(b.args[0], integer(b.args[1].value * ex.value))
        return Expr("pow", (b, ex))

    # -- unary ------------------------------------------------------------------

    def _unary(self, op: str, a: Expr) -> Expr:
        if a.is_integer:
            key = (op, a.value)
            if key in _EXACT_UNARY_FOLDS:
                self.fired["unary-exact"] += 1
                return integer(_EXACT_UNARY_FOLDS[key])
            if op == "sqrt" and a.value >= 0:
                r = math.isqrt(a.value)
                if r * r == a.value:
                    self.fired["sqrt-perfect-square"] += 1
                    return integer(r)
        if a.op is not None and (op, a.op) in _INVERSE_PAIRS:
            self.fired[_INVERSE_PAIRS[(op, a.op)]] += 1
            return a.args[0]
        return Expr(op, (a,))


# Shared helpers -----------------------------------------------------------------

def _split_int_coeff(term: Expr) -> Tuple[int, Optional[Expr]]:
    """term -> (integer coefficient, non-integer part or None)."""
    if term.is_integer:
        return term.value, None
    if term.op != "*":
        return 1, term
    coeff, factors = _product_parts(term)
    if not factors:
        return coeff, None
    return coeff, _emit_product(1, factors)


def _split_rat_coeff(term: Expr) -> Tuple[Fraction, Optional[Expr]]:
    """term -> (rational coefficient, remaining part or None); a canonical
    quotient with an integer denominator contributes 1/k."""
    if term.op == "/" and term.args[1].is_integer and term.args[1].value != 0:
        num_coeff, rest = _split_int_coeff(term.args[0])
        return Fraction(num_coeff, term.args[1].value), rest
    coeff, rest = _split_int_coeff(term)
    return Fraction(coeff), rest


def _product_parts(e: Expr) -> Tuple[int, List[Expr]]:
    coeff = 1
    factors: List[Expr] = []

    def walk(node: Expr):
        nonlocal coeff
        if node.op == "*":
            walk(node.args[0])
            walk(node.args[1])
        elif node.is_integer:
            coeff *= node.value
        else:
            factors.append(node)

    walk(e)
    return coeff, factors


def _flatten_sum_terms(e: Expr) -> List[Tuple[Fraction, Optional[Expr]]]:
    out: List[Tuple[Fraction, Optional[Expr]]] = []

    def walk(node: Expr, sign: int):
        if node.op == "+":
            walk(node.args[0], sign)
            walk(node.args[1], sign)
        elif node.op == "-":
            walk(node.args[0], sign)
            walk(node.args[1], -sign)
        else:
            coeff, rest = _split_rat_coeff(node)
            out.append((sign * coeff, rest))

    walk(e, 1)
    return out


def _term_expr(coeff: int, rest: Optional[Expr]) -> Expr:
    if rest is None:
        return integer(coeff)
    if coeff == 1:
        return rest
    return Expr("*", (integer(coeff), rest))


def _rat_term_expr(coeff: Fraction, rest: Optional[Expr]) -> Expr:
    if coeff.denominator == 1:
        return _term_expr(coeff.numerator, rest)
    if rest is None:
        return Expr("/", (integer(coeff.numerator), integer(coeff.denominator)))
    return Expr("/", (_term_expr(coeff.numerator, rest), integer(coeff.denominator)))


def _emit_sum(terms: List[Tuple[Fraction, Optional[Expr]]]) -> Expr:
    if not terms:
        return ZERO
    coeff, rest = terms[0]
    if len(terms) == 1:
        return _rat_term_expr(coeff, rest)
    nxt = terms[1][0]
    if nxt > 0:
        return Expr("+", (_rat_term_expr(coeff, rest), _emit_sum(terms[1:])))
    return Expr("-", (_rat_term_expr(coeff, rest),
                      _emit_sum([(-c, r) for c, r in terms[1:]])))


def _emit_product(coeff: int, factors: List[Expr]) -> Expr:
    if coeff == 0:
        return ZERO
    if not factors:
        return integer(coeff)
    chain = factors[-1]
    for f in reversed(factors[:-1]):
        chain = Expr("*", (f, chain))
    if coeff == 1:
        return chain
    return Expr("*", (integer(coeff), chain))


def _is_trig_square(e: Expr, fn: str) -> bool:
    if e.op == "pow" and e.args[1].is_int(2) and e.args[0].op == fn:
        return True
    return e.op == "*" and e.args[0] == e.args[1] and e.args[0].op == fn


def _trig_square_arg(e: Expr) -> Optional[Expr]:
    if e.op == "pow":
        return e.args[0].args[0]
    if e.op == "*":
        return e.args[0].args[0]
    return None


def _trig_square_partner(e: Expr, fn: str) -> Expr:
    inner = _trig_square_arg(e)
    other = Expr(fn, (inner,))
    if e.op == "pow":
        return Expr("pow", (other, integer(2)))
    return Expr("*", (other, other))


# Public entry points --------------------------------------------------------------

def simplify(expr: Expr) -> Expr:
    """Strict canonicalization to fixpoint (bounded passes)."""
    out, _ = Simplifier().run(expr)
    return out


def simplify_with_report(expr: Expr) -> Tuple[Expr, SimplifyReport]:
    s = Simplifier()
    out, passes = s.run(expr)
    return out, SimplifyReport(
        input_tokens=len(to_prefix(expr)),
        output_tokens=len(to_prefix(out)),
        rules_fired=dict(s.fired),
        passes=passes,
    )


# Constant reduction ---------------------------------------------------------------

def _has_variable(e: Expr) -> bool:
    return any(n.is_symbol and n.value in VARIABLES for n in iter_nodes(e))


def _constants_in(e: Expr, constants) -> Counter:
    return Counter(n.value for n in iter_nodes(e)
                   if n.is_symbol and n.value in constants)


def _collapse_constant_subtrees(e: Expr, constants, global_counts, witnesses) -> Expr:
    """Replace maximal variable-free subtrees that contain exactly one
    integration constant (all of whose occurrences are inside) by the bare
    constant."""

    def walk(node: Expr) -> Expr:
        if node.op is None:
            return node
        if not _has_variable(node):
            local = _constants_in(node, constants)
            if len(local) == 1:
                name, cnt = next(iter(local.items()))
                if cnt == global_counts[name]:
                    witnesses.append(("const-collapse", name, node))
                    return symbol(name)
            # not collapsible as a whole; a smaller subtree may be
        args = tuple(walk(a) for a in node.args)
        if all(a is b for a, b in zip(args, node.args)):
            return node
        return Expr(node.op, args)

    return walk(e)


def _split_variable_part(term: Expr) -> Tuple[List[Expr], Optional[Expr]]:
    """term -> (variable-free factors incl. integer coeff, variable part)."""
    coeff, factors = _product_parts(term)
    var_factors = [f for f in factors if _has_variable(f)]
    free_factors = [f for f in factors if not _has_variable(f)]
    if coeff != 1 or not free_factors:
        free_factors = ([integer(coeff)] if coeff != 1 else []) + free_factors
    varpart = _emit_product(1, var_factors) if var_factors else None
    return free_factors, varpart


def _absorb_constants(e: Expr, constants, global_counts, witnesses) -> Expr:
    """Sum groups and product coefficient chains absorb variable-free parts
    into a constant they contain."""

    def coeff_constant(coeff_expr: Expr) -> Optional[str]:
        local = _constants_in(coeff_expr, constants)
        if len(local) != 1:
            return None
        name, cnt = next(iter(local.items()))
        if cnt != global_counts[name]:
            return None
        return name

    def walk(node: Expr, parent_op: Optional[str] = None) -> Expr:
        if node.op is None:
            return node
        args = tuple(walk(a, node.op) for a in node.args)
        node = node if all(a is b for a, b in zip(args, node.args)) else Expr(node.op, args)

        if node.op in ("+", "-"):
            if parent_op in ("+", "-"):
                return node  # only the chain root groups and absorbs
            terms = _signed_terms(node)
            if len(terms) < 2:
                return node
            groups: List[Tuple[Optional[Expr], List[Expr]]] = []
            index: Dict[Optional[Expr], int] = {}
            for sign, term in terms:
                free_factors, varpart = _split_variable_part(term)
                coeff = _emit_product(1, free_factors) if free_factors else ONE
                if sign < 0:
                    coeff = Expr("*", (integer(-1), coeff))
                if varpart in index:
                    groups[index[varpart]][1].append(coeff)
                else:
                    index[varpart] = len(groups)
                    groups.append((varpart, [coeff]))
            rebuilt: List[Tuple[Optional[Expr], Expr]] = []
            absorbed = False
            for varpart, coeffs in groups:
                total = coeffs[0]
                for extra in coeffs[1:]:
                    total = Expr("+", (total, extra))
                total = simplify(total)
                name = coeff_constant(total)
                if name is not None and total != symbol(name):
                    witnesses.append(("const-absorb-sum", name, total))
                    total = symbol(name)
                    absorbed = True
                rebuilt.append((varpart, total))
            if not absorbed:
                return node
            new_terms = [
                total if varpart is None else simplify(Expr("*", (total, varpart)))
                for varpart, total in rebuilt
            ]
            out = new_terms[0]
            for t in new_terms[1:]:
                out = Expr("+", (out, t))
            return simplify(out)

        if node.op == "*":
            if parent_op == "*":
                return node
            free_factors, varpart = _split_variable_part(node)
            if varpart is None or not free_factors:
                return node
            coeff = simplify(_emit_product(1, free_factors))
            name = coeff_constant(coeff)
            if name is not None and coeff != symbol(name):
                witnesses.append(("const-absorb-prod", name, coeff))
                return simplify(Expr("*", (symbol(name), varpart)))
            return node

        return node

    return walk(e)


def _signed_terms(e: Expr) -> List[Tuple[int, Expr]]:
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


def _log_power_rewrite(e: Expr, witnesses) -> Expr:
    """log(u^k) -> k log(u), log(u*u) -> 2 log(u); assumes u > 0."""

    def walk(node: Expr) -> Expr:
        if node.op is None:
            return node
        args = tuple(walk(a) for a in node.args)
        node = node if all(a is b for a, b in zip(args, node.args)) else Expr(node.op, args)
        if node.op == "log":
            inner = node.args[0]
            if inner.op == "pow" and inner.args[1].is_integer and inner.args[1].value >= 2:
                witnesses.append(("log-power", "", node))
                return Expr("*", (inner.args[1], Expr("log", (inner.args[0],))))
            if inner.op == "*" and inner.args[0] == inner.args[1]:
                witnesses.append(("log-power", "", node))
                return Expr("*", (integer(2), Expr("log", (inner.args[0],))))
        return node

    return walk(e)


def reduce_constants(expr: Expr, constants=PROBE_CONSTANT_NAMES) -> Expr:
    out, _ = reduce_constants_traced(expr, constants)
    return out


def reduce_constants_traced(expr: Expr, constants=PROBE_CONSTANT_NAMES):
    """Coefficient simplification up to a change of the integration constants;
    returns (expression, witness list) where each witness records the rule,
    the constant and the replaced subexpression."""
    witnesses: List[Tuple[str, str, Expr]] = []
    e = simplify(expr)
    for _ in range(20):
        counts = _constants_in(e, constants)
        e2 = _log_power_rewrite(e, witnesses)
        e2 = _collapse_constant_subtrees(e2, constants, counts, witnesses)
        e2 = simplify(e2)
        counts = _constants_in(e2, constants)
        e2 = _absorb_constants(e2, constants, counts, witnesses)
        e2 = simplify(e2)
        if e2 == e:
            break
        e = e2
    return e, witnesses


# Equation normalization -------------------------------------------------------------

def as_fraction(e: Expr) -> Tuple[Expr, Expr]:
    """Combine the rational structure of ``e`` into numerator/denominator.
    Unary functions and pow are atomic."""
    if e.op is None or e.op in ("pow",) or len(e.args) == 1:
        return e, ONE
    if e.op in ("+", "-"):
        n1, d1 = as_fraction(e.args[0])
        n2, d2 = as_fraction(e.args[1])
        if d1 == d2:
            return Expr(e.op, (n1, n2)), d1
        if d1 == ONE:
            return Expr(e.op, (Expr("*", (n1, d2)), n2)), d2
        if d2 == ONE:
            return Expr(e.op, (n1, Expr("*", (n2, d1)))), d1
        return (Expr(e.op, (Expr("*", (n1, d2)), Expr("*", (n2, d1)))),
                Expr("*", (d1, d2)))
    if e.op == "*":
        n1, d1 = as_fraction(e.args[0])
        n2, d2 = as_fraction(e.args[1])
        num = n1 if n2 == ONE else (n2 if n1 == ONE else Expr("*", (n1, n2)))
        den = d1 if d2 == ONE else (d2 if d1 == ONE else Expr("*", (d1, d2)))
        return num, den
    if e.op == "/":
        n1, d1 = as_fraction(e.args[0])
        n2, d2 = as_fraction(e.args[1])
        num = n1 if d2 == ONE else Expr("*", (n1, d2))
        den = n2 if d1 == ONE else Expr("*", (d1, n2))
        return num, den
    return e, ONE


def is_provably_positive(e: Expr) -> bool:
    """Syntactic, conservative positivity: when in doubt, not positive."""
    if e.is_integer:
        return e.value > 0
    if e.op == "exp" or e.op == "cosh":
        return True
    if e.is_symbol and e.value in ("e", "pi"):
        return True
    if e.op == "*":
        return all(is_provably_positive(a) for a in e.args)
    if e.op == "/":
        return all(is_provably_positive(a) for a in e.args)
    if e.op == "sqrt":
        return is_provably_positive(e.args[0])
    if e.op == "+":
        a, b = e.args
        return (is_provably_positive(a) and _is_nonnegative(b)) or \
            (_is_nonnegative(a) and is_provably_positive(b))
    if e.op == "pow" and e.args[1].is_integer:
        # even powers are only nonnegative (the base may vanish)
        return is_provably_positive(e.args[0])
    return False


def _is_nonnegative(e: Expr) -> bool:
    if e.is_integer:
        return e.value >= 0
    if is_provably_positive(e):
        return True
    if e.op == "pow" and e.args[1].is_integer and e.args[1].value % 2 == 0:
        return True
    if e.op == "*" and e.args[0] == e.args[1]:
        return True
    if e.op == "sqrt":
        return True
    return False


def normalize_equation(expr: Expr) -> Expr:
    """Normalize the left side of "expr = 0": combine the rational structure,
    drop the denominator (nonzero wherever the expression is defined), cancel
    and drop provably positive factors, and fix the leading sign."""
    s = simplify(expr)
    num, den = as_fraction(s)
    num = simplify(num)
    den = simplify(den)
    if den.is_int(0):
        raise NoFactorRemainsError("denominator identically zero")

    rat_terms = []  # (Fraction coeff, Counter of factors)
    for coeff, rest in _flatten_sum_terms(num):
        if coeff == 0:
            continue
        if rest is None:
            rat_terms.append((coeff, Counter()))
        else:
            c2, factors = _product_parts(rest)
            rat_terms.append((coeff * c2, Counter(factors)))
    if not rat_terms:
        raise NoFactorRemainsError("equation is identically zero")
    # clear rational coefficients: multiplying by a positive integer
    # preserves the zero set
    scale = math.lcm(*(coeff.denominator for coeff, _ in rat_terms))
    terms = [(int(coeff * scale), fs) for coeff, fs in rat_terms]

    common = terms[0][1].copy()
    for _, fs in terms[1:]:
        common &= fs
    gcd_coeff = 0
    for coeff, _ in terms:
        gcd_coeff = math.gcd(gcd_coeff, abs(coeff))

    dcoeff, dfactors = _product_parts(den)
    dcounter = Counter(dfactors)
    cancel = common & dcounter
    common -= cancel
    g = math.gcd(gcd_coeff, abs(dcoeff))
    if g > 1:
        terms = [(coeff // g, fs) for coeff, fs in terms]
        gcd_coeff //= g

    kept_factors: List[Expr] = []
    for f, m in sorted(common.items(), key=lambda kv: sort_key(kv[0])):
        if not is_provably_positive(f):
            kept_factors.extend([f] * m)
    # drop the positive part of the integer gcd
    if gcd_coeff > 1:
        terms = [(coeff // gcd_coeff, fs) for coeff, fs in terms]

    reduced = []
    for coeff, fs in terms:
        fs = fs.copy()
        fs -= common
        fs -= cancel
        rest = sorted(fs.elements(), key=sort_key)
        reduced.append((coeff, rest))

    body_terms = [_term_expr(coeff, _emit_product(1, rest) if rest else None)
                  for coeff, rest in reduced]
    body = body_terms[0]
    for t in body_terms[1:]:
        body = Expr("+", (body, t))
    body = simplify(body)
    if body.is_int(0):
        raise NoFactorRemainsError("equation is identically zero")
    if not kept_factors and body.op is None and not _has_variable(body):
        raise NoFactorRemainsError("all factors provably positive or constant")

    # sign-normalize: the canonical leading term's coefficient becomes positive
    canonical_terms = _flatten_sum_terms(body)
    if canonical_terms and canonical_terms[0][0] < 0:
        body = simplify(_emit_sum([(-cf, r) for cf, r in canonical_terms]))

    out = body
    for f in reversed(kept_factors):
        out = Expr("*", (f, out))
    out = simplify(out)
    if out.is_integer or (not _has_variable(out) and not kept_factors):
        raise NoFactorRemainsError("no variable-bearing factor remains")
    return out
