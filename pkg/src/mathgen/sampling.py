"""Uniform random generation of expression trees with exactly n internal nodes.

The sampler walks the list of empty slots left to right.  At each step it draws
the position (and arity) of the next internal node from the exact distribution
induced by the subtree-count table D(e, n), turning the slots before it into
leaves.  All draws use arbitrary-precision integers, never floats, so the
distribution over shapes is exactly uniform.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import List, Optional, Tuple, Union

from .expr import Expr, GrammarConfig

# A skeleton is nested tuples: 0 for a leaf slot, (1, child) for a unary node,
# (2, left, right) for a binary node.
TreeSkeleton = Union[int, tuple]

MODES = ("binary", "unary-binary", "weighted")


class TooLargeError(ValueError):
    """Exhaustive enumeration requested beyond the supported size."""


class ConfigMismatchError(ValueError):
    """Skeleton and grammar disagree (e.g. unary nodes with p1 = 0)."""


@dataclass(frozen=True)
class SubtreeTable:
    """D(e, n) counts of subtrees generable from e empty slots with n internal
    nodes left, for one of the three generation modes."""

    mode: str
    n_max: int
    rows: tuple  # rows[n] is a tuple over e = 0 .. (n_max - n + 2)
    L: int = 1
    p1: int = 0
    p2: int = 1

    def D(self, e: int, n: int) -> int:
        if n < 0 or e < 0:
            raise ValueError(f"D({e},{n}) out of range")
        if e == 0:
            return 0 if n > 0 else 1
        return self.rows[n][e]


def build_tables(config: GrammarConfig, n_max: int, mode: Optional[str] = None) -> SubtreeTable:
    """Tabulate D(e, n) for e up to n_max + 2.

    binary:       D(e,0) = 1,   D(e,n) = D(e-1,n) + D(e+1,n-1)
    unary-binary: D(e,0) = 1,   D(e,n) = D(e-1,n) + D(e,n-1) + D(e+1,n-1)
    weighted:     D(e,0) = L^e, D(e,n) = L D(e-1,n) + p1 D(e,n-1) + p2 D(e+1,n-1)
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    if mode is None:
        mode = config.mode
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if mode != "binary" and config.p1 == 0 and mode == "unary-binary":
        mode = "binary"
    L, p1, p2 = config.L, config.p1, config.p2
    width0 = n_max + 3
    if mode == "weighted":
        row0 = [L ** e for e in range(width0)]
    else:
        row0 = [1] * width0
    row0[0] = 1  # D(0,0): the empty forest
    rows = [tuple(row0)]
    prev = row0
    for n in range(1, n_max + 1):
        width = n_max - n + 3
        row = [0] * width
        for e in range(1, width):
            if mode == "binary":
                row[e] = row[e - 1] + prev[e + 1]
            elif mode == "unary-binary":
                row[e] = row[e - 1] + prev[e] + prev[e + 1]
            else:
                row[e] = L * row[e - 1] + p1 * prev[e] + p2 * prev[e + 1]
        rows.append(tuple(row))
        prev = row
    return SubtreeTable(mode=mode, n_max=n_max, rows=tuple(rows), L=L, p1=p1, p2=p2)


def sample_position_binary(e: int, n: int, table: SubtreeTable, rng: random.Random) -> int:
    """Draw k with P(k) = D(e-k+1, n-1) / D(e, n), exactly."""
    total = table.D(e, n)
    r = rng.randrange(total)
    acc = 0
    for k in range(e):
        acc += table.D(e - k + 1, n - 1)
        if r < acc:
            return k
    raise AssertionError("position weights failed to normalize")


def sample_position_arity(
    e: int, n: int, table: SubtreeTable, rng: random.Random
) -> Tuple[int, int]:
    """Joint draw of (position k, arity a).

    unary-binary: P(k,1) = D(e-k, n-1)/D(e,n), P(k,2) = D(e-k+1, n-1)/D(e,n)
    weighted:     the same terms scaled by L^k and the operator counts p1/p2.
    """
    total = table.D(e, n)
    r = rng.randrange(total)
    acc = 0
    if table.mode == "weighted":
        lk = 1
        for k in range(e):
            acc += lk * table.p1 * table.D(e - k, n - 1)
            if r < acc:
                return k, 1
            acc += lk * table.p2 * table.D(e - k + 1, n - 1)
            if r < acc:
                return k, 2
            lk *= table.L
    else:
        for k in range(e):
            acc += table.D(e - k, n - 1)
            if r < acc:
                return k, 1
            acc += table.D(e - k + 1, n - 1)
            if r < acc:
                return k, 2
    raise AssertionError("position/arity weights failed to normalize")


class _Slot:
    __slots__ = ("arity", "kids")

    def __init__(self):
        self.arity = -1
        self.kids = ()


def _freeze(slot: _Slot) -> TreeSkeleton:
    if slot.arity == 0:
        return 0
    if slot.arity == 1:
        return (1, _freeze(slot.kids[0]))
    return (2, _freeze(slot.kids[0]), _freeze(slot.kids[1]))


def sample_tree(n: int, table: SubtreeTable, rng: random.Random) -> TreeSkeleton:
    """Uniform skeleton with exactly n internal nodes (binary or unary-binary
    per the table's mode; weighted mode biases shapes by decoration count)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if n > table.n_max:
        raise ValueError(f"n={n} exceeds table n_max={table.n_max}")
    root = _Slot()
    empties: List[_Slot] = [root]
    e, left = 1, n
    while left > 0:
        if table.mode == "binary":
            k, a = sample_position_binary(e, left, table, rng), 2
        else:
            k, a = sample_position_arity(e, left, table, rng)
        for s in empties[:k]:
            s.arity = 0
        node = empties[k]
        node.arity = a
        node.kids = tuple(_Slot() for _ in range(a))
        empties = list(node.kids) + empties[k + 1:]
        e = e - k if a == 1 else e - k + 1
        left -= 1
    for s in empties:
        s.arity = 0
    return _freeze(root)


def skeleton_internal_nodes(skel: TreeSkeleton) -> int:
    if skel == 0:
        return 0
    return 1 + sum(skeleton_internal_nodes(k) for k in skel[1:])


def decorate(skel: TreeSkeleton, config: GrammarConfig, rng: random.Random) -> Expr:
    """Assign operators and leaf values to a skeleton, i.i.d. per the config's
    priors (uniform unless weights are given)."""

    def pick(population, weights):
        if weights is None:
            return population[rng.randrange(len(population))]
        return rng.choices(population, weights=weights, k=1)[0]

    def walk(node: TreeSkeleton) -> Expr:
        if node == 0:
            return pick(config.leaves, config.leaf_weights)
        if node[0] == 1:
            if config.p1 == 0:
                raise ConfigMismatchError("unary node in skeleton but p1 = 0")
            op = pick(config.unary_ops, config.unary_weights)
            return Expr(op, (walk(node[1]),))
        op = pick(config.binary_ops, config.binary_weights)
        return Expr(op, (walk(node[1]), walk(node[2])))

    return walk(skel)


def sample_expression(
    n: int, config: GrammarConfig, table: SubtreeTable, rng: random.Random
) -> Expr:
    return decorate(sample_tree(n, table, rng), config, rng)


# Exhaustive enumeration (test oracle) ----------------------------------------

_ENUM_LIMIT = 8


def enumerate_trees(n: int, mode: str) -> list:
    """Every skeleton with exactly n internal nodes, duplicate-free."""
    if n > _ENUM_LIMIT:
        raise TooLargeError(f"enumeration capped at n <= {_ENUM_LIMIT}")
    if mode not in ("binary", "unary-binary"):
        raise ValueError(f"unknown enumeration mode {mode!r}")

    memo = {}

    def gen(m: int) -> list:
        if m == 0:
            return [0]
        if m in memo:
            return memo[m]
        out = []
        if mode == "unary-binary":
            out.extend((1, t) for t in gen(m - 1))
        for i in range(m):
            for left in gen(i):
                for right in gen(m - 1 - i):
                    out.append((2, left, right))
        memo[m] = out
        return out

    return gen(n)


def enumerate_expressions(n: int, config: GrammarConfig) -> list:
    """Every decorated expression with exactly n internal nodes (tiny alphabets
    only; used as an oracle for counting and distribution tests)."""
    mode = "unary-binary" if config.p1 > 0 else "binary"
    out = []
    for skel in enumerate_trees(n, mode):
        out.extend(_decorations(skel, config))
    return out


def _decorations(skel: TreeSkeleton, config: GrammarConfig) -> list:
    if skel == 0:
        return list(config.leaves)
    if skel[0] == 1:
        kids = _decorations(skel[1], config)
        return [Expr(op, (k,)) for op in config.unary_ops for k in kids]
    lefts = _decorations(skel[1], config)
    rights = _decorations(skel[2], config)
    return [Expr(op, (a, b)) for op in config.binary_ops for a in lefts for b in rights]
