import pytest
import sympy as sp

from casbridge.convert import (
    ConversionError,
    prefix_to_sympy,
    sympy_to_prefix,
    sympy_to_prefix_str,
)

x = sp.Symbol("x")


class TestPrefixToSympy:
    def test_arithmetic(self):
        assert prefix_to_sympy("+ + 2 * + 3 + + 5 + 2") == 23

    def test_function_tree(self):
        assert prefix_to_sympy("* x log / c x") == x * sp.log(sp.Symbol("c") / x)

    def test_integer_signs(self):
        assert prefix_to_sympy("- 3 4") == -34
        assert prefix_to_sympy("+ 0") == 0

    def test_builtins(self):
        assert prefix_to_sympy("e") is sp.E
        assert prefix_to_sympy("pi") is sp.pi

    def test_derivative_symbols(self):
        e = prefix_to_sympy("- y'' y")
        assert sp.Symbol("ydoubleprime") in e.free_symbols

    @pytest.mark.parametrize("bad", ["+ 2 * 3", "frob", "sin", "+ 0 1", ""])
    def test_malformed(self, bad):
        with pytest.raises(ConversionError):
            prefix_to_sympy(bad)


class TestSympyToPrefix:
    @pytest.mark.parametrize("expr", [
        x * sp.sin(x) + 3,
        sp.Rational(3, 4) * x,
        sp.sqrt(1 - x ** 2),
        1 / x,
        1 / sp.sqrt(x + 1),
        sp.exp(x) * sp.log(x + 2),
        x ** 5,
        sp.acos(x) - sp.pi,
        sp.asinh(2 * x) * sp.Integer(-7),
    ])
    def test_roundtrip(self, expr):
        tokens = sympy_to_prefix(expr)
        back = prefix_to_sympy(tokens)
        assert sp.simplify(back - expr) == 0, (expr, tokens)

    def test_abs_inside_log_uses_bare_argument(self):
        tokens = sympy_to_prefix_str(sp.log(sp.Abs(x)))
        assert tokens == "log x"

    def test_unsupported_rejected(self):
        with pytest.raises(ConversionError):
            sympy_to_prefix(sp.erf(x))
        with pytest.raises(ConversionError):
            sympy_to_prefix(sp.Integral(sp.exp(x ** 2), x))
        with pytest.raises(ConversionError):
            sympy_to_prefix(sp.Symbol("q"))

    def test_integration_results_convert(self):
        anti = sp.integrate(sp.acos(x), x)
        tokens = sympy_to_prefix(anti)
        assert sp.simplify(prefix_to_sympy(tokens) - anti) == 0
