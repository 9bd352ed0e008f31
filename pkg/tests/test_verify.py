import pytest

from mathgen.expr import binary, integer, parse_prefix, symbol, to_prefix_str, unary
from mathgen.verify import (
    INVALID,
    ProbeConfig,
    UNDECIDABLE,
    VALID,
    check_integral,
    check_ode,
    expr_equiv,
    verify_batch,
)

from fixture_expressions import (
    BULKY_ANTIDERIVATIVE,
    EQUIV_EQUATION,
    EQUIV_HYPOTHESES,
    X_CUBED_SIN_X,
)

x, y, c = symbol("x"), symbol("y"), symbol("c")
log = lambda e: unary("log", e)

WIDE = ProbeConfig(probes=64, min_survivors=3)


class TestExprEquiv:
    def test_rewritten_constant_form(self):
        a = x * log(c / x)
        b = x * log(c) - x * log(x)
        assert expr_equiv(a, b).outcome == VALID

    def test_symbolic_zero_shortcut(self):
        e = symbol("e")
        v = expr_equiv(e, e)
        assert v.outcome == VALID and v.method == "symbolic-zero"

    def test_distinct(self):
        v = expr_equiv(x, x + integer(1))
        assert v.outcome == INVALID
        assert v.witness is not None and "bindings" in v.witness

    def test_tolerance_validation(self):
        with pytest.raises(ValueError):
            ProbeConfig(rel_tol=0.0)
        with pytest.raises(ValueError):
            ProbeConfig(min_survivors=2)


class TestCheckIntegral:
    def test_long_known_pair(self):
        assert check_integral(X_CUBED_SIN_X, BULKY_ANTIDERIVATIVE).outcome == VALID

    def test_constant_integrand(self):
        assert check_integral(integer(1), x).outcome == VALID

    def test_wrong_antiderivative(self):
        wrong = binary("pow", x, integer(3)) * unary("cos", x)
        assert check_integral(X_CUBED_SIN_X, wrong).outcome == INVALID


class TestCheckOde:
    def test_alternate_constant_solution(self):
        eq = x * symbol("y'") - y + x
        hyp = x * c - x * log(x)
        assert check_ode(eq, hyp, 1).outcome == VALID

    def test_gnarly_published_solution(self):
        assert check_ode(EQUIV_EQUATION, EQUIV_HYPOTHESES[0], 1, WIDE).outcome == VALID

    def test_linear_family_fails_second_order(self):
        eq = symbol("y''") - y
        assert check_ode(eq, symbol("c1") * x, 2).outcome == INVALID

    def test_undecidable_when_probes_die(self):
        eq = symbol("y'") - y
        hyp = unary("sqrt", integer(-1) - x * x)  # never evaluates real
        v = check_ode(eq, hyp, 1)
        assert v.outcome == UNDECIDABLE

    def test_perturbation_flips_verdict(self):
        eq = x * symbol("y'") - y + x
        hyp = x * c - x * log(x)
        perturbed = hyp + (x * x) / integer(1000)
        assert check_ode(eq, perturbed, 1).outcome == INVALID


class TestBatch:
    def _lines(self, entries):
        return [e + "\n" for e in entries]

    def test_beam_semantics(self):
        problem = to_prefix_str(x * symbol("y'") - y + x)
        good = to_prefix_str(x * c - x * log(x))
        bad = to_prefix_str(x)
        lines = self._lines([
            f"{problem}\t{bad}\tode1",
            f"{problem}\t{good}\tode1",
        ])
        report = verify_batch(lines)
        assert report.problems == 1 and report.solved == 1
        assert report.accuracy == 1.0
        # adding garbage hypotheses must not change solved status
        lines_more = lines + self._lines([f"{problem}\t+ + 2 * 3\tode1"])
        report2 = verify_batch(lines_more)
        assert report2.solved == report.solved == 1

    def test_malformed_line_recorded_invalid(self):
        lines = self._lines([
            "+ 2 * 3\tx",           # malformed problem (dangling tokens)
            "x\tx",                  # d/dx x = 1 != x
            f"{to_prefix_str(integer(1))}\t{to_prefix_str(x)}",
        ])
        report = verify_batch(lines)
        outcomes = [lv.outcome for lv in report.lines]
        assert outcomes[0] == INVALID and report.lines[0].method == "parse-error"
        assert outcomes[1] == INVALID
        assert outcomes[2] == VALID
        assert report.problems == 3 and report.solved == 1

    def test_task_column_and_default(self):
        eq = to_prefix_str(symbol("y''") - y)
        sol = to_prefix_str(symbol("c1") * unary("exp", x))
        report = verify_batch(self._lines([f"{eq}\t{sol}\tode2"]))
        assert report.lines[0].outcome == VALID

    def test_json_lines_shape(self):
        import json
        report = verify_batch(self._lines(["+ 1\tx"]))
        payloads = [json.loads(line) for line in report.to_json_lines().splitlines()]
        assert payloads[0]["outcome"] == VALID
        assert payloads[-1]["accuracy"] == 1.0

    def test_unknown_task_is_invalid(self):
        report = verify_batch(self._lines(["x\tx\tfrobnicate"]))
        assert report.lines[0].outcome == INVALID
