"""Expression trees, the token alphabet, and the prefix-sequence codec.

An expression is an immutable tree: binary/unary operators as internal nodes,
integers, variables and named constants as leaves.  There is no unary minus;
negation is multiplication by the integer leaf -1.  Integers serialize as a
sign token followed by base-10 digit tokens ("+ 2 3 5 4"), which keeps the
prefix encoding parenthesis-free and bijective.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Mapping, Optional, Sequence, Union

UNARY_OPS = (
    "exp", "log", "sqrt",
    "sin", "cos", "tan",
    "asin", "acos", "atan",
    "sinh", "cosh", "tanh",
    "asinh", "acosh", "atanh",
)
BINARY_OPS = ("+", "-", "*", "/", "pow")

VARIABLES = ("x", "y", "z", "y'", "y''")
CONSTANTS = ("e", "pi", "c", "c1", "c2")
SYMBOLS = VARIABLES + CONSTANTS

_DIGITS = tuple(str(d) for d in range(10))
_UNARY_SET = frozenset(UNARY_OPS)
_BINARY_SET = frozenset(BINARY_OPS)
_SYMBOL_SET = frozenset(SYMBOLS)
_DIGIT_SET = frozenset(_DIGITS)


class MalformedSequenceError(ValueError):
    """A token sequence that does not decode to a well-formed expression."""


class PathOutOfRangeError(IndexError):
    """subtree_at received a path that leaves the tree."""


class Expr:
    """Immutable expression node.

    ``op`` is None for leaves, otherwise an operator symbol; ``value`` carries
    the leaf payload (int, or a symbol name from SYMBOLS).
    """

    __slots__ = ("op", "args", "value", "_hash")

    def __init__(self, op: Optional[str], args: tuple = (), value=None):
        if op is None:
            if args:
                raise ValueError("leaf with children")
            if not (isinstance(value, int) and not isinstance(value, bool)) and value not in _SYMBOL_SET:
                raise ValueError(f"bad leaf payload: {value!r}")
        elif op in _UNARY_SET:
            if len(args) != 1 or value is not None:
                raise ValueError(f"unary {op} needs exactly one child")
        elif op in _BINARY_SET:
            if len(args) != 2 or value is not None:
                raise ValueError(f"binary {op} needs exactly two children")
        else:
            raise ValueError(f"unknown operator {op!r}")
        object.__setattr__(self, "op", op)
        object.__setattr__(self, "args", args)
        object.__setattr__(self, "value", value)
        object.__setattr__(self, "_hash", hash((op, value, args)))

    def __setattr__(self, name, val):  # pragma: no cover - guard only
        raise AttributeError("Expr is immutable")

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, Expr):
            return NotImplemented
        if self._hash != other._hash:
            return False
        return self.op == other.op and self.value == other.value and self.args == other.args

    def __repr__(self):
        return f"Expr({to_infix(self)})"

    # Structural predicates -------------------------------------------------

    @property
    def is_leaf(self) -> bool:
        return self.op is None

    @property
    def is_integer(self) -> bool:
        return self.op is None and isinstance(self.value, int)

    @property
    def is_symbol(self) -> bool:
        return self.op is None and isinstance(self.value, str)

    @property
    def arity(self) -> int:
        return len(self.args)

    def is_int(self, v: int) -> bool:
        return self.is_integer and self.value == v

    # Operator sugar (used heavily by the calculus and ODE machinery) -------

    def __add__(self, other):
        return Expr("+", (self, _coerce(other)))

    def __radd__(self, other):
        return Expr("+", (_coerce(other), self))

    def __sub__(self, other):
        return Expr("-", (self, _coerce(other)))

    def __rsub__(self, other):
        return Expr("-", (_coerce(other), self))

    def __mul__(self, other):
        return Expr("*", (self, _coerce(other)))

    def __rmul__(self, other):
        return Expr("*", (_coerce(other), self))

    def __truediv__(self, other):
        return Expr("/", (self, _coerce(other)))

    def __rtruediv__(self, other):
        return Expr("/", (_coerce(other), self))

    def __pow__(self, other):
        return Expr("pow", (self, _coerce(other)))

    def __neg__(self):
        return Expr("*", (integer(-1), self))


def _coerce(v) -> Expr:
    if isinstance(v, Expr):
        return v
    if isinstance(v, int) and not isinstance(v, bool):
        return integer(v)
    raise TypeError(f"cannot use {v!r} as an expression")


# Constructors ---------------------------------------------------------------

def integer(v: int) -> Expr:
    return Expr(None, value=v)


def symbol(name: str) -> Expr:
    return Expr(None, value=name)


def unary(op: str, a: Expr) -> Expr:
    return Expr(op, (a,))


def binary(op: str, a: Expr, b: Expr) -> Expr:
    return Expr(op, (a, b))


ZERO = integer(0)
ONE = integer(1)
X = symbol("x")
Y = symbol("y")
YP = symbol("y'")
YPP = symbol("y''")


# Prefix codec ---------------------------------------------------------------

def _int_tokens(v: int) -> list:
    sign = "-" if v < 0 else "+"
    return [sign] + list(str(abs(v)))


def to_prefix(expr: Expr) -> list:
    """Prefix traversal of the tree; integers expand to sign + digits."""
    out: list = []
    stack = [expr]
    while stack:
        node = stack.pop()
        if node.op is None:
            if isinstance(node.value, int):
                out.extend(_int_tokens(node.value))
            else:
                out.append(node.value)
        else:
            out.append(node.op)
            stack.extend(reversed(node.args))
    return out


def to_prefix_str(expr: Expr) -> str:
    return " ".join(to_prefix(expr))


def parse_prefix(tokens: Union[Sequence[str], str]) -> Expr:
    """Inverse of to_prefix.  Raises MalformedSequenceError on any bad input:
    unknown tokens, truncated arity, dangling tokens, or bad integer forms."""
    if isinstance(tokens, str):
        tokens = tokens.split()
    n = len(tokens)
    i = 0
    stack: list = []  # frames [op, arity, children]
    while True:
        if i >= n:
            raise MalformedSequenceError("truncated sequence")
        t = tokens[i]
        node: Optional[Expr] = None
        if t in ("+", "-") and i + 1 < n and tokens[i + 1] in _DIGIT_SET:
            j = i + 1
            digits = []
            while j < n and tokens[j] in _DIGIT_SET:
                digits.append(tokens[j])
                j += 1
            if len(digits) > 1 and digits[0] == "0":
                raise MalformedSequenceError(f"leading zero in integer at token {i}")
            v = int("".join(digits))
            if v == 0 and t == "-":
                raise MalformedSequenceError(f"negative zero at token {i}")
            node = integer(-v if t == "-" else v)
            i = j
        elif t in _BINARY_SET:
            stack.append([t, 2, []])
            i += 1
            continue
        elif t in _UNARY_SET:
            stack.append([t, 1, []])
            i += 1
            continue
        elif t in _SYMBOL_SET:
            node = symbol(t)
            i += 1
        elif t in _DIGIT_SET:
            raise MalformedSequenceError(f"bare digit {t!r} at token {i}")
        else:
            raise MalformedSequenceError(f"unknown token {t!r} at token {i}")

        while True:
            if not stack:
                if i != n:
                    raise MalformedSequenceError(f"dangling tokens after position {i}")
                return node
            top = stack[-1]
            top[2].append(node)
            if len(top[2]) == top[1]:
                stack.pop()
                node = Expr(top[0], tuple(top[2]))
            else:
                break


# Infix rendering ------------------------------------------------------------

def to_infix(expr: Expr) -> str:
    """Fully parenthesized display form, e.g. "(x * log((c / x)))"."""
    if expr.op is None:
        return str(expr.value)
    if expr.op in _UNARY_SET:
        return f"{expr.op}({to_infix(expr.args[0])})"
    a, b = expr.args
    op = "**" if expr.op == "pow" else expr.op
    return f"({to_infix(a)} {op} {to_infix(b)})"


# Structural queries ---------------------------------------------------------

def iter_nodes(expr: Expr) -> Iterator[Expr]:
    stack = [expr]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(node.args)


def count_internal_nodes(expr: Expr) -> int:
    return sum(1 for node in iter_nodes(expr) if node.op is not None)


def count_leaves(expr: Expr) -> int:
    return sum(1 for node in iter_nodes(expr) if node.op is None)


def token_length(expr: Expr) -> int:
    return len(to_prefix(expr))


def free_variables(expr: Expr) -> set:
    return {n.value for n in iter_nodes(expr) if n.is_symbol and n.value in VARIABLES}


def free_constants(expr: Expr) -> set:
    return {n.value for n in iter_nodes(expr) if n.is_symbol and n.value in CONSTANTS}


def symbol_count(expr: Expr, name: str) -> int:
    return sum(1 for n in iter_nodes(expr) if n.is_symbol and n.value == name)


def subtree_at(expr: Expr, path: Sequence[int]) -> Expr:
    node = expr
    for step in path:
        if not 0 <= step < len(node.args):
            raise PathOutOfRangeError(f"no child {step} at {to_infix(node)}")
        node = node.args[step]
    return node


def substitute(expr: Expr, mapping: Mapping[str, Expr]) -> Expr:
    """Replace symbol leaves by expressions (capture is not a concern here)."""
    if expr.op is None:
        if expr.is_symbol and expr.value in mapping:
            return mapping[expr.value]
        return expr
    args = tuple(substitute(a, mapping) for a in expr.args)
    if all(a is b for a, b in zip(args, expr.args)):
        return expr
    return Expr(expr.op, args)


def leaf_paths(expr: Expr) -> list:
    """Paths (tuples of child indices) of every leaf, in prefix order."""
    out = []

    def walk(node: Expr, path: tuple):
        if node.op is None:
            out.append(path)
        else:
            for idx, child in enumerate(node.args):
                walk(child, path + (idx,))

    walk(expr, ())
    return out


def replace_at(expr: Expr, path: Sequence[int], new: Expr) -> Expr:
    if not path:
        return new
    step = path[0]
    if not 0 <= step < len(expr.args):
        raise PathOutOfRangeError(f"no child {step} at {to_infix(expr)}")
    args = list(expr.args)
    args[step] = replace_at(expr.args[step], path[1:], new)
    return Expr(expr.op, tuple(args))


# Vocabulary -----------------------------------------------------------------

def vocabulary() -> list:
    """Closed token alphabet; line number in the vocabulary file is the id."""
    return list(BINARY_OPS) + list(UNARY_OPS) + list(SYMBOLS) + list(_DIGITS)


def write_vocabulary(path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for tok in vocabulary():
            fh.write(tok + "\n")


# Grammar configuration ------------------------------------------------------

def default_leaves(integer_range=(-5, 5), variables=("x",), constants=()) -> tuple:
    leaves = [symbol(v) for v in variables]
    leaves += [symbol(k) for k in constants]
    lo, hi = integer_range
    leaves += [integer(v) for v in range(lo, hi + 1) if v != 0]
    return tuple(leaves)


@dataclass(frozen=True)
class GrammarConfig:
    """Sampling alphabet: p1 unary operators, p2 binary operators, L leaves,
    plus the size budget and optional sampling weights."""

    unary_ops: tuple = UNARY_OPS
    binary_ops: tuple = ("+", "-", "*", "/")
    leaves: tuple = field(default_factory=default_leaves)
    max_internal_nodes: int = 15
    integer_range: tuple = (-5, 5)
    unary_weights: Optional[tuple] = None
    binary_weights: Optional[tuple] = None
    leaf_weights: Optional[tuple] = None

    def __post_init__(self):
        if self.p2 < 1:
            raise ValueError("need at least one binary operator")
        if self.L < 1:
            raise ValueError("need at least one leaf value")
        if self.max_internal_nodes < 1:
            raise ValueError("max_internal_nodes must be >= 1")
        for op in self.unary_ops:
            if op not in _UNARY_SET:
                raise ValueError(f"unknown unary operator {op!r}")
        for op in self.binary_ops:
            if op not in _BINARY_SET:
                raise ValueError(f"unknown binary operator {op!r}")
        for leaf in self.leaves:
            if not (isinstance(leaf, Expr) and leaf.is_leaf):
                raise ValueError("leaves must be leaf expressions")
        for weights, pop in (
            (self.unary_weights, self.unary_ops),
            (self.binary_weights, self.binary_ops),
            (self.leaf_weights, self.leaves),
        ):
            if weights is not None:
                if len(weights) != len(pop):
                    raise ValueError("weight list length mismatch")
                if any(w <= 0 for w in weights):
                    raise ValueError("weights must be positive")

    @property
    def p1(self) -> int:
        return len(self.unary_ops)

    @property
    def p2(self) -> int:
        return len(self.binary_ops)

    @property
    def L(self) -> int:
        return len(self.leaves)

    @property
    def mode(self) -> str:
        return "binary" if self.p1 == 0 else "unary-binary"

    def allows(self, expr: Expr) -> bool:
        """Whether every operator of ``expr`` is in this config's sets."""
        for node in iter_nodes(expr):
            if node.op is not None:
                if node.op in _UNARY_SET and node.op not in self.unary_ops:
                    return False
                if node.op in _BINARY_SET and node.op not in self.binary_ops:
                    return False
        return True

    @classmethod
    def default(cls) -> "GrammarConfig":
        return cls()

    @classmethod
    def binary_only(cls, binary_ops=("+", "-", "*", "/"), leaves=None,
                    max_internal_nodes=15) -> "GrammarConfig":
        return cls(
            unary_ops=(),
            binary_ops=binary_ops,
            leaves=leaves if leaves is not None else default_leaves(),
            max_internal_nodes=max_internal_nodes,
        )
