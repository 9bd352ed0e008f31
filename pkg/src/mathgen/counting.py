"""Exact enumeration of tree and expression spaces, plus asymptotic estimates.

All exact counts are arbitrary-precision integers computed from recurrences;
every recurrence division is checked to be remainder-free.  Asymptotics are
computed in log space so they stay usable far past float overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

BigCount = int


class InternalInexactDivisionError(ArithmeticError):
    """A recurrence division left a remainder; indicates an implementation bug."""


class DomainError(ValueError):
    """Parameters outside the formula's domain."""


@dataclass(frozen=True)
class CountQuery:
    n: int
    p1: int
    p2: int
    L: int

    def __post_init__(self):
        if self.n < 0 or self.p1 < 0 or self.p2 < 0 or self.L < 0:
            raise DomainError("counts require nonnegative parameters")


def catalan(n: int) -> BigCount:
    """Number of binary trees with n internal nodes: (2n)! / ((n+1)! n!)."""
    if n < 0:
        raise DomainError("n must be >= 0")
    return math.comb(2 * n, n) // (n + 1)


def _exact_div(num: BigCount, den: BigCount) -> BigCount:
    q, r = divmod(num, den)
    if r:
        raise InternalInexactDivisionError(f"{num} not divisible by {den}")
    return q


def schroeder_sequence(n_max: int) -> list:
    """S_0 .. S_n_max via (n+1)S_n = 3(2n-1)S_{n-1} - (n-2)S_{n-2}."""
    if n_max < 0:
        raise DomainError("n must be >= 0")
    seq = [1, 2]
    for n in range(2, n_max + 1):
        seq.append(_exact_div(3 * (2 * n - 1) * seq[n - 1] - (n - 2) * seq[n - 2], n + 1))
    return seq[: n_max + 1]


def schroeder(n: int) -> BigCount:
    return schroeder_sequence(n)[n]


def expression_sequence(n_max: int, p1: int, p2: int, L: int) -> list:
    """E_0 .. E_n_max via
    (n+1)E_n = (p1 + 2 L p2)(2n-1)E_{n-1} - p1^2 (n-2)E_{n-2},
    seeded with E_0 = L and E_1 = (p1 + p2 L) L.

    The generating function is (1 - p1 z - sqrt((1 - p1 z)^2 - 4 p2 L z)) /
    (2 p2 z); the p1^2 in the recurrence comes from the z^2 coefficient under
    the radical.  Cross-checked against exhaustive decorated-tree enumeration
    for several (p1, p2, L); reduces to the Schroeder recurrence for
    p1 = p2 = L = 1 and to the Catalan one for p1 = 0."""
    CountQuery(n_max, p1, p2, L)
    seq = [L, (p1 + p2 * L) * L]
    a = p1 + 2 * L * p2
    for n in range(2, n_max + 1):
        seq.append(_exact_div(
            a * (2 * n - 1) * seq[n - 1] - p1 * p1 * (n - 2) * seq[n - 2], n + 1))
    return seq[: n_max + 1]


def expression_count(q: CountQuery) -> BigCount:
    return expression_sequence(q.n, q.p1, q.p2, q.L)[q.n]


def binary_expression_count(n: int, p2: int, L: int) -> BigCount:
    """Closed formula for the pure-binary case: C_n * p2^n * L^(n+1)."""
    if n < 0:
        raise DomainError("n must be >= 0")
    return catalan(n) * p2 ** n * L ** (n + 1)


# Asymptotic estimates (log-domain internals) ---------------------------------

def ln_catalan_asymptotic(n: int) -> float:
    """ln of C_n ~ 4^n / (n sqrt(pi n))."""
    if n < 1:
        raise DomainError("asymptotics need n >= 1")
    return n * math.log(4.0) - math.log(n) - 0.5 * math.log(math.pi * n)


def ln_schroeder_asymptotic(n: int) -> float:
    """ln of S_n ~ (1+sqrt(2))^(2n+1) / (2^(3/4) sqrt(pi n^3))."""
    if n < 1:
        raise DomainError("asymptotics need n >= 1")
    r = 1.0 + math.sqrt(2.0)
    return (2 * n + 1) * math.log(r) - 0.75 * math.log(2.0) - 0.5 * (math.log(math.pi) + 3 * math.log(n))


def ln_expression_asymptotic(n: int, p1: int, p2: int, L: int) -> float:
    """ln of E_n ~ (sqrt(d) / (2 p2 sqrt(2 pi n^3))) (p1 + 2 p2 L + d)^(n+1/2)
    where d = sqrt((p1 + 2 p2 L)^2 - p1^2) = 2 sqrt(p2 L (p1 + p2 L)).

    Singularity expansion of the generating function at its smallest root
    1 / (p1 + 2 p2 L + d); at p1 = 0 this reduces exactly to the binary
    closed-form estimate."""
    if n < 1:
        raise DomainError("asymptotics need n >= 1")
    if p1 == 0:
        raise DomainError("general estimate needs p1 > 0; use the binary formula")
    a = p1 + 2.0 * p2 * L
    d = math.sqrt(a * a - float(p1) * p1)
    return (
        0.5 * math.log(d)
        - math.log(2 * p2)
        - 0.5 * (math.log(2 * math.pi) + 3 * math.log(n))
        + (n + 0.5) * math.log(a + d)
    )


def ln_binary_expression_asymptotic(n: int, p2: int, L: int) -> float:
    """ln of E_n ~ (1 / (n sqrt(pi n))) (4 p2)^n L^(n+1) for p1 = 0."""
    if n < 1:
        raise DomainError("asymptotics need n >= 1")
    return (
        -math.log(n)
        - 0.5 * math.log(math.pi * n)
        + n * math.log(4.0 * p2)
        + (n + 1) * math.log(L)
    )


def _from_ln(v: float) -> float:
    try:
        return math.exp(v)
    except OverflowError:
        return math.inf


def catalan_asymptotic(n: int) -> float:
    return _from_ln(ln_catalan_asymptotic(n))


def schroeder_asymptotic(n: int) -> float:
    return _from_ln(ln_schroeder_asymptotic(n))


def expression_asymptotic(n: int, p1: int, p2: int, L: int) -> float:
    return _from_ln(ln_expression_asymptotic(n, p1, p2, L))


def binary_expression_asymptotic(n: int, p2: int, L: int) -> float:
    return _from_ln(ln_binary_expression_asymptotic(n, p2, L))


@dataclass(frozen=True)
class AsymptoticEstimates:
    catalan_approx: float
    schroeder_approx: float
    expression_approx: float


def asymptotic_counts(q: CountQuery) -> AsymptoticEstimates:
    """Float estimates for C_n, S_n and E_n at the query's parameters.
    For p1 = 0 the expression estimate uses the binary closed form."""
    if q.p1 == 0:
        expr_ln = ln_binary_expression_asymptotic(q.n, q.p2, q.L)
    else:
        expr_ln = ln_expression_asymptotic(q.n, q.p1, q.p2, q.L)
    return AsymptoticEstimates(
        catalan_approx=catalan_asymptotic(q.n),
        schroeder_approx=schroeder_asymptotic(q.n),
        expression_approx=_from_ln(expr_ln),
    )


def format_ln(v: float) -> str:
    """Scientific-notation string for a value given as a natural log
    (prints magnitudes that overflow a float)."""
    log10 = v / math.log(10.0)
    exp10 = math.floor(log10)
    mantissa = 10.0 ** (log10 - exp10)
    return f"{mantissa:.6f}e+{exp10:d}" if exp10 >= 0 else f"{mantissa:.6f}e{exp10:d}"
