import random

import pytest

from mathgen.datasets import PairStore
from mathgen.expr import GrammarConfig, default_leaves, free_variables, integer, symbol
from mathgen.integration import (
    GenOptions,
    GenerationStalledError,
    elementary_pairs,
    gen_bwd,
    gen_fwd,
    gen_ibp,
    seed_store,
    seed_store_with_derivatives,
)
from mathgen.oracle import OracleUnavailableError, TableOracle
from mathgen.verify import check_integral

x = symbol("x")


class TestSeedTable:
    def test_every_elementary_pair_verifies(self):
        pairs = elementary_pairs()
        assert len(pairs) >= 30
        for problem, solution in pairs:
            verdict = check_integral(problem, solution)
            assert verdict.ok, f"{problem} -> {solution}: {verdict}"

    def test_seeding(self):
        store = PairStore()
        added = seed_store(store)
        assert added == len(store) >= 30


class TestBwd:
    def test_run_is_gated_and_deduplicated(self, default_config):
        opts = GenOptions(min_ops=3, max_ops=10)
        examples = list(gen_bwd(150, default_config, random.Random(1), opts))
        assert len(examples) == 150
        keys = {ex.key() for ex in examples}
        assert len(keys) == 150
        for ex in examples[:25]:
            assert ex.task == "bwd"
            assert check_integral(ex.problem, ex.solution).ok
            assert ex.problem_length <= 512 and ex.solution_length <= 512

    def test_determinism(self, default_config):
        a = [ex.to_line() for ex in
             gen_bwd(40, default_config, random.Random(9), GenOptions(min_ops=3, max_ops=8))]
        b = [ex.to_line() for ex in
             gen_bwd(40, default_config, random.Random(9), GenOptions(min_ops=3, max_ops=8))]
        assert a == b

    def test_stalls_on_impossible_config(self):
        config = GrammarConfig(
            unary_ops=(), binary_ops=("+",),
            leaves=(integer(1), integer(2)),  # no x anywhere
            max_internal_nodes=3)
        opts = GenOptions(min_ops=1, max_ops=3, max_consecutive_rejects=60)
        with pytest.raises(GenerationStalledError) as err:
            list(gen_bwd(1, config, random.Random(0), opts))
        assert err.value.counters["reject_no_x"] >= 60


class TestFwd:
    def test_with_table_oracle(self, default_config):
        oracle = TableOracle(elementary_pairs())
        opts = GenOptions(min_ops=1, max_ops=2,
                          max_consecutive_rejects=200_000)
        examples = list(gen_fwd(5, default_config, random.Random(3), oracle, opts=opts))
        assert len(examples) == 5
        for ex in examples:
            assert ex.task == "fwd"
            assert check_integral(ex.problem, ex.solution).ok
        assert opts.counters["reject_oracle_failed"] > 0  # most samples unknown

    def test_oracle_unavailable_propagates(self, default_config):
        class DeadOracle:
            def integrate(self, integrand, timeout=10.0):
                raise OracleUnavailableError("gone")

        with pytest.raises(OracleUnavailableError):
            list(gen_fwd(1, default_config, random.Random(0), DeadOracle()))


class TestIbp:
    def test_run_discovers_and_verifies(self, default_config):
        store = PairStore()
        seed_store(store)
        seeded = len(store)
        opts = GenOptions(min_ops=1, max_ops=3, max_consecutive_rejects=2_000_000)
        examples = list(gen_ibp(60, default_config, random.Random(17), store, opts))
        assert len(examples) == 60
        assert len(store) > seeded  # discoveries were inserted back
        assert opts.counters["hit_fG"] + opts.counters["hit_Fg"] >= 60
        keys = {ex.key() for ex in examples}
        assert len(keys) == 60
        for ex in examples[:20]:
            assert ex.task == "ibp"
            assert check_integral(ex.problem, ex.solution).ok

    def test_symmetric_discovery(self):
        # with int(f G) known, int(F g) = F G - known
        config = GrammarConfig(
            unary_ops=("sin",), binary_ops=("+", "*"),
            leaves=default_leaves((-2, 2)), max_internal_nodes=3)
        store = PairStore()
        seed_store(store)
        opts = GenOptions(min_ops=1, max_ops=2, max_consecutive_rejects=3_000_000)
        examples = list(gen_ibp(25, config, random.Random(23), store, opts))
        assert len(examples) == 25
        for ex in examples:
            assert check_integral(ex.problem, ex.solution).ok

    def test_derivative_seeding(self, default_config):
        store = PairStore()
        added = seed_store_with_derivatives(store, 400, default_config,
                                            random.Random(2), max_ops=2)
        # only ~1 in 6 tiny samples contains x at all
        assert added > 20
        # seeded pairs are exact derivative pairs
        from mathgen.expr import parse_prefix
        for key, sol in list(store.items())[:15]:
            assert check_integral(parse_prefix(key), sol).ok


class TestLengthStructure:
    def test_directional_asymmetry(self, default_config):
        from mathgen.datasets import stats_of_examples
        bwd = list(gen_bwd(300, default_config, random.Random(5),
                           GenOptions(min_ops=3, max_ops=15)))
        s = stats_of_examples(bwd)
        assert s.input_mean > s.output_mean

        store = PairStore()
        seed_store(store)
        ibp = list(gen_ibp(300, default_config, random.Random(6), store,
                           GenOptions(min_ops=1, max_ops=3,
                                      max_consecutive_rejects=5_000_000)))
        s2 = stats_of_examples(ibp)
        assert s2.output_mean > s2.input_mean
