"""Generators for the three integration datasets.

bwd: sample f, differentiate, emit (f', f).  fwd: sample f, ask the external
integrator, emit (f, F).  ibp: sample F and G and use integration by parts,
``int F g = F G - int f G``, against a store of already-known pairs.  Every
emitted example must pass the integral check - a gate, not a sample.
"""

from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterator, Optional

from .calculus import differentiate, is_valid_expression
from .datasets import Example, MAX_TOKENS, PairStore, clean
from .expr import (
    Expr,
    GrammarConfig,
    free_variables,
    integer,
    symbol,
    to_prefix_str,
    token_length,
    unary,
)
from .oracle import IntegratorOracle
from .sampling import build_tables, sample_expression
from .simplify import simplify
from .verify import ProbeConfig, check_integral


class GenerationStalledError(RuntimeError):
    """Too many consecutive rejections; the configuration looks wrong."""

    def __init__(self, counters: Counter):
        super().__init__(f"generation stalled; rejection counters: {dict(counters)}")
        self.counters = counters


@dataclass
class GenOptions:
    min_ops: int = 3
    max_ops: Optional[int] = None  # defaults to config.max_internal_nodes
    max_tokens: int = MAX_TOKENS
    max_consecutive_rejects: int = 10_000
    probes: Optional[ProbeConfig] = None
    counters: Counter = field(default_factory=Counter)


def _sample_function(config: GrammarConfig, table, rng: random.Random,
                     opts: GenOptions) -> Optional[Expr]:
    """One sampled function containing x, or None (counted reject)."""
    n = rng.randint(opts.min_ops, opts.max_ops or config.max_internal_nodes)
    f = sample_expression(n, config, table, rng)
    if "x" not in free_variables(f):
        opts.counters["reject_no_x"] += 1
        return None
    return f


def gen_bwd(count: int, config: GrammarConfig, rng: random.Random,
            opts: Optional[GenOptions] = None) -> Iterator[Example]:
    """Backward pairs (simplify(f'), simplify(f)); no external dependency."""
    opts = opts or GenOptions()
    table = build_tables(config, opts.max_ops or config.max_internal_nodes)
    seen = set()
    emitted = 0
    consecutive = 0
    while emitted < count:
        if consecutive >= opts.max_consecutive_rejects:
            raise GenerationStalledError(opts.counters)
        consecutive += 1
        f = _sample_function(config, table, rng, opts)
        if f is None:
            continue
        solution = simplify(f)
        problem = differentiate(f, "x")
        example = Example(problem, solution, "bwd")
        cleaned = clean(example, opts.max_tokens)
        if cleaned is None:
            opts.counters["reject_clean"] += 1
            continue
        key = cleaned.key()
        if key in seen:
            opts.counters["reject_duplicate"] += 1
            continue
        if not check_integral(cleaned.problem, cleaned.solution, opts.probes).ok:
            opts.counters["reject_unverified"] += 1
            continue
        seen.add(key)
        emitted += 1
        consecutive = 0
        opts.counters["emitted"] += 1
        yield cleaned


def gen_fwd(count: int, config: GrammarConfig, rng: random.Random,
            oracle: IntegratorOracle, timeout: float = 10.0,
            opts: Optional[GenOptions] = None) -> Iterator[Example]:
    """Forward pairs (f, F) from the external integrator; functions the
    backend cannot integrate are discarded."""
    opts = opts or GenOptions()
    table = build_tables(config, opts.max_ops or config.max_internal_nodes)
    seen = set()
    emitted = 0
    consecutive = 0
    while emitted < count:
        if consecutive >= opts.max_consecutive_rejects:
            raise GenerationStalledError(opts.counters)
        consecutive += 1
        f = _sample_function(config, table, rng, opts)
        if f is None:
            continue
        problem = simplify(f)
        if not is_valid_expression(problem) or token_length(problem) > opts.max_tokens:
            opts.counters["reject_clean"] += 1
            continue
        if to_prefix_str(problem) in seen:
            opts.counters["reject_duplicate"] += 1
            continue
        opts.counters["oracle_calls"] += 1
        result = oracle.integrate(problem, timeout)
        if result is None:
            opts.counters["reject_oracle_failed"] += 1
            continue
        example = Example(problem, simplify(result), "fwd")
        cleaned = clean(example, opts.max_tokens)
        if cleaned is None:
            opts.counters["reject_clean"] += 1
            continue
        if not check_integral(cleaned.problem, cleaned.solution, opts.probes).ok:
            opts.counters["reject_unverified"] += 1
            continue
        seen.add(cleaned.key())
        emitted += 1
        consecutive = 0
        opts.counters["emitted"] += 1
        yield cleaned


def gen_ibp(count: int, config: GrammarConfig, rng: random.Random,
            store: PairStore, opts: Optional[GenOptions] = None) -> Iterator[Example]:
    """Integration-by-parts pairs discovered against the known-pair store.
    Whenever the integral of a new function is found it is inserted back, so
    discovery compounds within a run."""
    opts = opts or GenOptions(min_ops=1, max_ops=3)
    table = build_tables(config, opts.max_ops or config.max_internal_nodes)
    seen = set()
    emitted = 0
    consecutive = 0
    while emitted < count:
        if consecutive >= opts.max_consecutive_rejects:
            raise GenerationStalledError(opts.counters)
        consecutive += 1
        F = _sample_function(config, table, rng, opts)
        G = _sample_function(config, table, rng, opts) if F is not None else None
        if F is None or G is None:
            continue
        F = simplify(F)
        G = simplify(G)
        if not (is_valid_expression(F) and is_valid_expression(G)):
            opts.counters["reject_clean"] += 1
            continue
        f = differentiate(F, "x")
        g = differentiate(G, "x")
        fG = simplify(Expr("*", (f, G)))
        Fg = simplify(Expr("*", (F, g)))
        FG = Expr("*", (F, G))
        known_fG = store.get(fG)
        if known_fG is not None:
            problem, solution = Fg, simplify(Expr("-", (FG, known_fG)))
            opts.counters["hit_fG"] += 1
        else:
            known_Fg = store.get(Fg)
            if known_Fg is not None:
                problem, solution = fG, simplify(Expr("-", (FG, known_Fg)))
                opts.counters["hit_Fg"] += 1
            else:
                opts.counters["reject_no_hit"] += 1
                continue
        example = Example(problem, solution, "ibp")
        cleaned = clean(example, opts.max_tokens)
        if cleaned is None:
            opts.counters["reject_clean"] += 1
            continue
        if not check_integral(cleaned.problem, cleaned.solution, opts.probes).ok:
            opts.counters["reject_unverified"] += 1
            continue
        store.insert(cleaned.problem, cleaned.solution)
        key = cleaned.key()
        if key in seen:
            opts.counters["reject_duplicate"] += 1
            continue
        seen.add(key)
        emitted += 1
        consecutive = 0
        opts.counters["emitted"] += 1
        yield cleaned


# Store seeding -----------------------------------------------------------------

def _x() -> Expr:
    return symbol("x")


def elementary_pairs() -> list:
    """A small table of elementary antiderivatives (the cold-start seed)."""
    x = _x()
    two = integer(2)
    pairs = [
        (integer(1), x),
        (x, (x * x) / two),
        (x * x, (x * (x * x)) / integer(3)),
        (x * (x * x), ((x * x) * (x * x)) / integer(4)),
        (unary("sin", x), -unary("cos", x)),
        (unary("cos", x), unary("sin", x)),
        (unary("tan", x), -unary("log", unary("cos", x))),
        (unary("exp", x), unary("exp", x)),
        (unary("sinh", x), unary("cosh", x)),
        (unary("cosh", x), unary("sinh", x)),
        (unary("tanh", x), unary("log", unary("cosh", x))),
        (unary("log", x), x * unary("log", x) - x),
        (unary("sqrt", x), (two * (x * unary("sqrt", x))) / integer(3)),
        (integer(1) / x, unary("log", x)),
        (integer(1) / (x * x), -(integer(1) / x)),
        (integer(1) / unary("sqrt", x), two * unary("sqrt", x)),
        (integer(1) / (unary("cos", x) * unary("cos", x)), unary("tan", x)),
        (integer(1) / (unary("sin", x) * unary("sin", x)),
         -(integer(1) / unary("tan", x))),
        (integer(1) / (integer(1) + x * x), unary("atan", x)),
        (integer(1) / unary("sqrt", integer(1) - x * x), unary("asin", x)),
        (integer(1) / unary("sqrt", integer(1) + x * x), unary("asinh", x)),
        (integer(1) / unary("sqrt", x * x - integer(1)), unary("acosh", x)),
        (unary("asin", x), x * unary("asin", x) + unary("sqrt", integer(1) - x * x)),
        (unary("acos", x), x * unary("acos", x) - unary("sqrt", integer(1) - x * x)),
        (unary("atan", x), x * unary("atan", x) - unary("log", integer(1) + x * x) / two),
        (unary("asinh", x), x * unary("asinh", x) - unary("sqrt", integer(1) + x * x)),
        (x * unary("sin", x), unary("sin", x) - x * unary("cos", x)),
        (x * unary("cos", x), unary("cos", x) + x * unary("sin", x)),
        (x * unary("exp", x), (x - integer(1)) * unary("exp", x)),
        (x * unary("log", x),
         (x * x) * unary("log", x) / two - (x * x) / integer(4)),
        (unary("exp", -x), -unary("exp", -x)),
        (x / (integer(1) + x * x), unary("log", integer(1) + x * x) / two),
        (unary("cos", x) * unary("cos", x),
         x / two + unary("sin", x) * unary("cos", x) / two),
        (unary("sin", x) * unary("sin", x),
         x / two - unary("sin", x) * unary("cos", x) / two),
        (unary("sin", x) * unary("cos", x),
         unary("sin", x) * unary("sin", x) / two),
    ]
    return [(simplify(p), simplify(s)) for p, s in pairs]


def seed_store(store: PairStore) -> int:
    added = 0
    for problem, solution in elementary_pairs():
        if store.insert(problem, solution):
            added += 1
    return added


def seed_store_with_derivatives(store: PairStore, count: int, config: GrammarConfig,
                                rng: random.Random, min_ops: int = 1,
                                max_ops: int = 3) -> int:
    """Seed the store with quick derivative pairs of small sampled functions
    (a cheap stand-in for a prior backward shard)."""
    table = build_tables(config, max_ops)
    added = 0
    for _ in range(count):
        n = rng.randint(min_ops, max_ops)
        f = sample_expression(n, config, table, rng)
        if "x" not in free_variables(f):
            continue
        fs = simplify(f)
        if not is_valid_expression(fs):
            continue
        problem = differentiate(f, "x")
        if not is_valid_expression(problem):
            continue
        if store.insert(problem, fs):
            added += 1
    return added
