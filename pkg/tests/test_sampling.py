import math
import random
from collections import Counter

import pytest
from scipy import stats as scistats

from mathgen.counting import catalan, schroeder
from mathgen.expr import GrammarConfig, count_internal_nodes, integer, symbol, to_prefix_str
from mathgen.sampling import (
    ConfigMismatchError,
    TooLargeError,
    build_tables,
    decorate,
    enumerate_expressions,
    enumerate_trees,
    sample_expression,
    sample_position_arity,
    sample_position_binary,
    sample_tree,
    skeleton_internal_nodes,
)

CHI2_ALPHA = 1e-3


def chi2_uniform_ok(counts, categories, total):
    observed = [counts.get(cat, 0) for cat in categories]
    _, p = scistats.chisquare(observed)
    return p > CHI2_ALPHA, p


class TestTables:
    def test_binary_hand_case(self, default_config):
        t = build_tables(GrammarConfig.binary_only(), 5)
        # D(1,1) = D(0,1) + D(2,0) = 0 + 1
        assert t.D(1, 1) == 1
        assert t.D(0, 3) == 0
        assert t.D(4, 0) == 1

    def test_binary_counts_catalan(self):
        t = build_tables(GrammarConfig.binary_only(), 20)
        for n in range(21):
            assert t.D(1, n) == catalan(n)

    def test_unary_binary_counts_schroeder(self, default_config):
        t = build_tables(default_config, 20)
        for n in range(21):
            assert t.D(1, n) == schroeder(n)

    def test_weighted_base_row(self, default_config):
        t = build_tables(default_config, 6, mode="weighted")
        L = default_config.L
        for e in range(5):
            assert t.D(e, 0) == L ** e

    def test_bad_mode(self, default_config):
        with pytest.raises(ValueError):
            build_tables(default_config, 5, mode="sideways")


class TestPositionDraws:
    def test_forced_position(self, rng):
        t = build_tables(GrammarConfig.binary_only(), 5)
        for _ in range(20):
            assert sample_position_binary(1, 1, t, rng) == 0

    def test_two_slots_split_evenly(self, rng):
        t = build_tables(GrammarConfig.binary_only(), 5)
        draws = Counter(sample_position_binary(2, 1, t, rng) for _ in range(4000))
        # both positions have weight D(2,0)=D(1,0)=1
        assert set(draws) == {0, 1}
        assert abs(draws[0] - 2000) < 3 * math.sqrt(1000)

    def test_arity_split(self, default_config, rng):
        t = build_tables(default_config, 5)
        assert t.D(1, 1) == 2
        draws = Counter(sample_position_arity(1, 1, t, rng) for _ in range(4000))
        assert set(draws) == {(0, 1), (0, 2)}
        assert abs(draws[(0, 1)] - 2000) < 3 * math.sqrt(1000)

    def test_weights_normalize_exactly(self, default_config):
        # cumulative weights over (k, arity) must sum to D(e, n)
        t = build_tables(default_config, 8)
        for e in range(1, 6):
            for n in range(1, 6):
                total = sum(t.D(e - k, n - 1) + t.D(e - k + 1, n - 1)
                            for k in range(e))
                assert total == t.D(e, n)

    def test_weighted_normalizes_exactly(self, default_config):
        t = build_tables(default_config, 8, mode="weighted")
        L, p1, p2 = t.L, t.p1, t.p2
        for e in range(1, 6):
            for n in range(1, 6):
                total = sum(L ** k * (p1 * t.D(e - k, n - 1) + p2 * t.D(e - k + 1, n - 1))
                            for k in range(e))
                assert total == t.D(e, n)

    def test_weighted_with_no_unary_reduces_to_binary(self, rng):
        config = GrammarConfig.binary_only()
        t = build_tables(config, 6, mode="weighted")
        for _ in range(50):
            k, a = sample_position_arity(3, 3, t, rng)
            assert a == 2 and 0 <= k <= 2


class TestSampleTree:
    def test_unique_one_node_shape(self, rng):
        t = build_tables(GrammarConfig.binary_only(), 3)
        assert sample_tree(1, t, rng) == (2, 0, 0)

    @pytest.mark.parametrize("mode", ["binary", "unary-binary"])
    def test_exact_node_count(self, default_config, rng, mode):
        config = GrammarConfig.binary_only() if mode == "binary" else default_config
        t = build_tables(config, 15)
        for n in (1, 2, 5, 15):
            for _ in range(50):
                assert skeleton_internal_nodes(sample_tree(n, t, rng)) == n

    @pytest.mark.parametrize("mode,n,samples", [
        ("binary", 3, 30_000),
        ("unary-binary", 3, 50_000),
    ])
    def test_uniform_over_shapes(self, default_config, mode, n, samples):
        config = GrammarConfig.binary_only() if mode == "binary" else default_config
        t = build_tables(config, n)
        rng = random.Random(777)
        shapes = enumerate_trees(n, mode)
        counts = Counter(sample_tree(n, t, rng) for _ in range(samples))
        assert set(counts) <= set(shapes)
        ok, p = chi2_uniform_ok(counts, shapes, samples)
        assert ok, f"chi-square p={p}"

    def test_mirrored_deep_shapes_equal_frequency(self, default_config):
        # two mirror-image five-node shapes (deep-left vs deep-right chain
        # with one unary node at the bottom) must come out equally often
        left = (2, (2, (2, (2, (1, 0), 0), 0), 0), 0)
        right = (2, 0, (2, 0, (2, 0, (2, 0, (1, 0)))))
        assert skeleton_internal_nodes(left) == skeleton_internal_nodes(right) == 5
        t = build_tables(default_config, 5)
        rng = random.Random(4242)
        samples = 100_000
        counts = Counter(sample_tree(5, t, rng) for _ in range(samples))
        expected = samples / schroeder(5)
        sigma = math.sqrt(expected)
        for shape in (left, right):
            assert abs(counts[shape] - expected) < 3 * sigma
        diff_sigma = math.sqrt(counts[left] + counts[right])
        assert abs(counts[left] - counts[right]) < 3 * diff_sigma

    def test_rejects_oversized_n(self, default_config, rng):
        t = build_tables(default_config, 5)
        with pytest.raises(ValueError):
            sample_tree(6, t, rng)


class TestDecorate:
    def test_forced_decoration(self, rng):
        config = GrammarConfig(
            unary_ops=(), binary_ops=("+",), leaves=(symbol("x"),),
            max_internal_nodes=3)
        e = decorate((2, 0, 0), config, rng)
        assert e == symbol("x") + symbol("x")

    def test_unary_without_p1_rejected(self, rng):
        config = GrammarConfig.binary_only()
        with pytest.raises(ConfigMismatchError):
            decorate((1, 0), config, rng)

    def test_leaf_distribution_uniform(self, default_config):
        rng = random.Random(9)
        counts = Counter(decorate(0, default_config, rng).value
                         for _ in range(110_000))
        assert len(counts) == 11
        expected = 110_000 / 11
        sigma = math.sqrt(expected * (1 - 1 / 11))
        for leaf, cnt in counts.items():
            assert abs(cnt - expected) < 4 * sigma, (leaf, cnt)

    def test_weighted_leaves(self):
        config = GrammarConfig(
            unary_ops=(), binary_ops=("+",),
            leaves=(symbol("x"), integer(1)), leaf_weights=(3.0, 1.0),
            max_internal_nodes=3)
        rng = random.Random(10)
        counts = Counter(decorate(0, config, rng).value for _ in range(40_000))
        assert abs(counts["x"] - 30_000) < 4 * math.sqrt(40_000 * 0.75 * 0.25)


class TestFullPipeline:
    def test_induced_expression_distribution(self, tiny_config):
        # uniform shapes x uniform decorations: P(expr) = 1/(S_n * choices)
        n = 2
        rng = random.Random(21)
        t = build_tables(tiny_config, n)
        samples = 60_000
        counts = Counter(to_prefix_str(sample_expression(n, tiny_config, t, rng))
                         for _ in range(samples))
        shapes = enumerate_trees(n, "unary-binary")

        def choices(skel):
            if skel == 0:
                return tiny_config.L
            if skel[0] == 1:
                return tiny_config.p1 * choices(skel[1])
            return tiny_config.p2 * choices(skel[1]) * choices(skel[2])

        expected = {}
        for skel in shapes:
            for e in enumerate_expressions_of(skel, tiny_config):
                expected[to_prefix_str(e)] = samples / (len(shapes) * choices(skel))
        assert set(counts) <= set(expected)
        observed = [counts.get(k, 0) for k in expected]
        _, p = scistats.chisquare(observed, [expected[k] for k in expected])
        assert p > CHI2_ALPHA

    def test_weighted_mode_uniform_over_expressions(self, tiny_config):
        # weighted node placement makes every decorated expression equally likely
        n = 2
        rng = random.Random(22)
        t = build_tables(tiny_config, n, mode="weighted")
        samples = 60_000
        counts = Counter(to_prefix_str(sample_expression(n, tiny_config, t, rng))
                         for _ in range(samples))
        universe = [to_prefix_str(e) for e in enumerate_expressions(n, tiny_config)]
        assert set(counts) <= set(universe)
        ok, p = chi2_uniform_ok(counts, universe, samples)
        assert ok, f"chi-square p={p}"

    def test_determinism(self, default_config):
        t = build_tables(default_config, 10)

        def stream():
            rng = random.Random(31)
            return [to_prefix_str(sample_expression((i % 10) + 1, default_config, t, rng))
                    for i in range(100)]

        assert stream() == stream()


def enumerate_expressions_of(skel, config):
    from mathgen.sampling import _decorations
    return _decorations(skel, config)


class TestEnumeration:
    def test_counts(self):
        assert len(enumerate_trees(2, "binary")) == 2
        assert len(enumerate_trees(2, "unary-binary")) == 6
        assert enumerate_trees(0, "binary") == [0]

    def test_no_duplicates(self):
        trees = enumerate_trees(5, "unary-binary")
        assert len(trees) == len(set(trees)) == schroeder(5)

    def test_too_large(self):
        with pytest.raises(TooLargeError):
            enumerate_trees(9, "binary")
