"""Conversion between prefix token strings and SymPy expressions.

The bridge owns this conversion; it deliberately does not import the primary
package.  The token grammar: operators { + - * / pow }, fifteen unary function
tokens, symbols { x y z e pi c c1 c2 y' y'' }, and integers written as a sign
token followed by digit tokens.
"""

from __future__ import annotations

from typing import List, Union

import sympy as sp


class ConversionError(ValueError):
    """Tokens or SymPy constructs outside the supported alphabet."""


_UNARY = {
    "exp": sp.exp, "log": sp.log, "sqrt": sp.sqrt,
    "sin": sp.sin, "cos": sp.cos, "tan": sp.tan,
    "asin": sp.asin, "acos": sp.acos, "atan": sp.atan,
    "sinh": sp.sinh, "cosh": sp.cosh, "tanh": sp.tanh,
    "asinh": sp.asinh, "acosh": sp.acosh, "atanh": sp.atanh,
}
_BINARY = ("+", "-", "*", "/", "pow")
_SYMBOLS = {
    "x": sp.Symbol("x"), "y": sp.Symbol("y"), "z": sp.Symbol("z"),
    "c": sp.Symbol("c"), "c1": sp.Symbol("c1"), "c2": sp.Symbol("c2"),
    "y'": sp.Symbol("yprime"), "y''": sp.Symbol("ydoubleprime"),
    "e": sp.E, "pi": sp.pi,
}
_DIGITS = set("0123456789")

X = _SYMBOLS["x"]
Y = _SYMBOLS["y"]
YPRIME = _SYMBOLS["y'"]
YDOUBLEPRIME = _SYMBOLS["y''"]


def prefix_to_sympy(tokens: Union[str, List[str]]) -> sp.Expr:
    if isinstance(tokens, str):
        tokens = tokens.split()
    pos = 0
    n = len(tokens)

    def parse() -> sp.Expr:
        nonlocal pos
        if pos >= n:
            raise ConversionError("truncated sequence")
        t = tokens[pos]
        if t in ("+", "-") and pos + 1 < n and tokens[pos + 1] in _DIGITS:
            pos += 1
            digits = []
            while pos < n and tokens[pos] in _DIGITS:
                digits.append(tokens[pos])
                pos += 1
            if len(digits) > 1 and digits[0] == "0":
                raise ConversionError("leading zero in integer")
            value = int("".join(digits))
            if value == 0 and t == "-":
                raise ConversionError("negative zero")
            return sp.Integer(-value if t == "-" else value)
        pos += 1
        if t in _BINARY:
            a = parse()
            b = parse()
            if t == "+":
                return a + b
            if t == "-":
                return a - b
            if t == "*":
                return a * b
            if t == "/":
                return a / b
            return a ** b
        if t in _UNARY:
            return _UNARY[t](parse())
        if t in _SYMBOLS:
            return _SYMBOLS[t]
        raise ConversionError(f"unknown token {t!r}")

    expr = parse()
    if pos != n:
        raise ConversionError("dangling tokens")
    return expr


def _int_tokens(v: int) -> List[str]:
    sign = "-" if v < 0 else "+"
    return [sign] + list(str(abs(v)))


_FUNC_NAMES = {
    sp.exp: "exp", sp.log: "log",
    sp.sin: "sin", sp.cos: "cos", sp.tan: "tan",
    sp.asin: "asin", sp.acos: "acos", sp.atan: "atan",
    sp.sinh: "sinh", sp.cosh: "cosh", sp.tanh: "tanh",
    sp.asinh: "asinh", sp.acosh: "acosh", sp.atanh: "atanh",
}

_SYMBOL_TOKENS = {
    "x": "x", "y": "y", "z": "z", "c": "c", "c1": "c1", "c2": "c2",
    "yprime": "y'", "ydoubleprime": "y''",
}


def _chain(op: str, parts: List[List[str]]) -> List[str]:
    out = parts[-1]
    for part in reversed(parts[:-1]):
        out = [op] + part + out
    return out


def sympy_to_prefix(expr: sp.Expr) -> List[str]:
    """Prefix tokens for a SymPy expression; raises ConversionError on
    constructs outside the alphabet (unevaluated integrals, special
    functions, piecewise results, non-rational numbers...)."""
    expr = expr.replace(sp.Abs, lambda t: t)  # log|u| convention

    def walk(e: sp.Expr) -> List[str]:
        if isinstance(e, sp.Integer):
            return _int_tokens(int(e))
        if isinstance(e, sp.Rational):
            return ["/"] + _int_tokens(int(e.p)) + _int_tokens(int(e.q))
        if e is sp.E:
            return ["e"]
        if e is sp.pi:
            return ["pi"]
        if isinstance(e, sp.Symbol):
            name = e.name
            if name in _SYMBOL_TOKENS:
                return [_SYMBOL_TOKENS[name]]
            raise ConversionError(f"symbol {name!r} outside the alphabet")
        if isinstance(e, sp.Add):
            return _chain("+", [walk(a) for a in e.args])
        if isinstance(e, sp.Mul):
            return _chain("*", [walk(a) for a in e.args])
        if isinstance(e, sp.Pow):
            base, exponent = e.args
            if exponent == sp.Rational(1, 2):
                return ["sqrt"] + walk(base)
            if exponent == sp.Integer(-1):
                return ["/", "+", "1"] + walk(base)
            if exponent == sp.Rational(-1, 2):
                return ["/", "+", "1", "sqrt"] + walk(base)
            return ["pow"] + walk(base) + walk(exponent)
        if e.func in _FUNC_NAMES and len(e.args) == 1:
            return [_FUNC_NAMES[e.func]] + walk(e.args[0])
        raise ConversionError(f"unsupported construct {type(e).__name__}: {e}")

    return walk(expr)


def sympy_to_prefix_str(expr: sp.Expr) -> str:
    return " ".join(sympy_to_prefix(expr))
