import pytest
from hypothesis import given, settings, strategies as st

from mathgen.expr import (
    Expr,
    GrammarConfig,
    MalformedSequenceError,
    PathOutOfRangeError,
    binary,
    count_internal_nodes,
    count_leaves,
    default_leaves,
    free_constants,
    free_variables,
    integer,
    leaf_paths,
    parse_prefix,
    replace_at,
    substitute,
    subtree_at,
    symbol,
    to_infix,
    to_prefix,
    to_prefix_str,
    token_length,
    unary,
    vocabulary,
    write_vocabulary,
)

from fixture_expressions import BULKY_ANTIDERIVATIVE

x = symbol("x")
c = symbol("c")


class TestPrefixCodec:
    def test_arithmetic_example(self):
        e = integer(2) + integer(3) * (integer(5) + integer(2))
        assert to_prefix(e) == ["+", "+", "2", "*", "+", "3", "+", "+", "5", "+", "2"]
        assert parse_prefix(to_prefix(e)) == e

    def test_single_leaf(self):
        assert to_prefix(x) == ["x"]
        assert parse_prefix(["x"]) == x

    def test_integer_digits(self):
        assert to_prefix(integer(2354)) == ["+", "2", "3", "5", "4"]
        assert to_prefix(integer(-34)) == ["-", "3", "4"]
        assert to_prefix(integer(0)) == ["+", "0"]
        assert parse_prefix(["+", "2", "3", "5", "4"]) == integer(2354)

    def test_string_form(self):
        e = x + integer(5)
        assert to_prefix_str(e) == "+ x + 5"
        assert parse_prefix("+ x + 5") == e

    @pytest.mark.parametrize("tokens", [
        ["+", "2", "*", "3"],          # dangling tokens after the integer
        ["+", "x"],                    # truncated arity
        ["*", "x", "frob"],            # unknown token
        ["+", "0", "1"],               # leading zero
        ["-", "0"],                    # negative zero
        ["5"],                         # bare digit
        ["sin"],                       # truncated unary
        ["+", "x", "x", "x"],          # dangling tokens
        [],                            # empty
    ])
    def test_malformed(self, tokens):
        with pytest.raises(MalformedSequenceError):
            parse_prefix(tokens)

    def test_no_parentheses_and_length(self):
        e = unary("sin", x + integer(42)) * integer(-7)
        toks = to_prefix(e)
        assert "(" not in toks and ")" not in toks
        ints = [n for n in (integer(42), integer(-7))]
        expansion = sum(1 + len(str(abs(i.value))) for i in ints)
        non_int_nodes = count_internal_nodes(e) + count_leaves(e) - len(ints)
        assert len(toks) == non_int_nodes + expansion


class TestInjectivity:
    def test_exhaustive_small(self, tiny_config):
        from mathgen.counting import CountQuery, expression_count
        from mathgen.sampling import enumerate_expressions

        seen = {}
        total = 0
        for n in range(4):
            exprs = enumerate_expressions(n, tiny_config)
            expected = expression_count(CountQuery(n, 1, 1, 2))
            assert len(exprs) == expected
            total += expected
            for e in exprs:
                key = tuple(to_prefix(e))
                assert key not in seen, f"collision: {e} vs {seen[key]}"
                seen[key] = e
        assert len(seen) == total


@st.composite
def expr_trees(draw, depth=0):
    kind = draw(st.integers(0, 60))
    if depth >= 5 or kind < 25:
        leaf = draw(st.one_of(
            st.integers(-10_000, 10_000).map(integer),
            st.sampled_from([symbol(s) for s in ("x", "y", "z", "e", "pi", "c")]),
        ))
        return leaf
    if kind < 40:
        op = draw(st.sampled_from(["exp", "log", "sqrt", "sin", "tanh", "acosh"]))
        return unary(op, draw(expr_trees(depth=depth + 1)))
    op = draw(st.sampled_from(["+", "-", "*", "/", "pow"]))
    return binary(op, draw(expr_trees(depth=depth + 1)),
                  draw(expr_trees(depth=depth + 1)))


class TestRoundTripProperty:
    @given(expr_trees())
    @settings(max_examples=300, deadline=None)
    def test_roundtrip(self, e):
        assert parse_prefix(to_prefix(e)) == e

    def test_roundtrip_sampled(self, default_config, rng):
        from mathgen.sampling import build_tables, sample_expression
        table = build_tables(default_config, 15)
        for _ in range(500):
            n = rng.randint(1, 15)
            e = sample_expression(n, default_config, table, rng)
            assert parse_prefix(to_prefix(e)) == e


class TestInfix:
    def test_simple(self):
        assert to_infix(x + integer(5)) == "(x + 5)"

    def test_negation_representation(self):
        assert to_infix(-x) == "(-1 * x)"

    def test_nested_function(self):
        e = x * unary("log", c / x)
        assert to_infix(e) == "(x * log((c / x)))"


class TestQueries:
    def test_count_internal_nodes(self):
        assert count_internal_nodes(x + integer(5)) == 1
        assert count_internal_nodes(x) == 0

    def test_fifteen_operator_fixture(self):
        assert count_internal_nodes(BULKY_ANTIDERIVATIVE) == 15

    def test_free_symbols(self):
        e = x * unary("log", c / x)
        assert free_variables(e) == {"x"}
        assert free_constants(e) == {"c"}

    def test_subtree_at(self):
        e = x + integer(5)
        assert subtree_at(e, []) == e
        assert subtree_at(e, [0]) == x
        assert subtree_at(e, [1]) == integer(5)
        with pytest.raises(PathOutOfRangeError):
            subtree_at(e, [2])
        with pytest.raises(PathOutOfRangeError):
            subtree_at(e, [0, 0])

    def test_leaf_paths_and_replace(self):
        e = x + unary("sin", integer(3))
        paths = leaf_paths(e)
        assert paths == [(0,), (1, 0)]
        replaced = replace_at(e, (1, 0), c)
        assert replaced == x + unary("sin", c)
        assert e == x + unary("sin", integer(3))  # original untouched

    def test_substitute(self):
        e = x + symbol("y")
        out = substitute(e, {"y": integer(2) * x})
        assert out == x + integer(2) * x

    def test_token_length(self):
        assert token_length(integer(123)) == 4


class TestVocabulary:
    def test_closed_and_unique(self):
        vocab = vocabulary()
        assert len(vocab) == len(set(vocab))
        assert "pow" in vocab and "y''" in vocab and "9" in vocab

    def test_file_format(self, tmp_path):
        p = tmp_path / "vocab.txt"
        write_vocabulary(p)
        lines = p.read_text().splitlines()
        assert lines == vocabulary()


class TestGrammarConfig:
    def test_default_matches_dataset_alphabet(self, default_config):
        assert default_config.p1 == 15
        assert default_config.p2 == 4
        assert default_config.L == 11
        assert default_config.max_internal_nodes == 15

    def test_validation(self):
        with pytest.raises(ValueError):
            GrammarConfig(binary_ops=())
        with pytest.raises(ValueError):
            GrammarConfig(leaves=())
        with pytest.raises(ValueError):
            GrammarConfig(unary_ops=("frob",))
        with pytest.raises(ValueError):
            GrammarConfig(leaf_weights=(1.0,))  # length mismatch
        with pytest.raises(ValueError):
            GrammarConfig(binary_weights=(1.0, -1.0, 1.0, 1.0))

    def test_allows(self, tiny_config):
        assert tiny_config.allows(unary("sin", x))
        assert not tiny_config.allows(unary("cos", x))
        assert not tiny_config.allows(x * x)

    def test_leaf_builder(self):
        leaves = default_leaves((-2, 2), ("x",), ("c",))
        values = {leaf.value for leaf in leaves}
        assert values == {"x", "c", -2, -1, 1, 2}


class TestImmutability:
    def test_no_mutation(self):
        with pytest.raises(AttributeError):
            x.value = "y"

    def test_zero_has_single_form(self):
        assert integer(0) == integer(-0)
        assert to_prefix(integer(0)) == ["+", "0"]
