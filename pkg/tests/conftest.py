import random

import pytest

from mathgen.expr import GrammarConfig, integer, symbol, unary


@pytest.fixture
def rng():
    return random.Random(12345)


@pytest.fixture(scope="session")
def default_config():
    return GrammarConfig()


@pytest.fixture(scope="session")
def tiny_config():
    """Two operators, two leaves; small enough to enumerate."""
    return GrammarConfig(
        unary_ops=("sin",),
        binary_ops=("+",),
        leaves=(symbol("x"), integer(2)),
        max_internal_nodes=5,
    )


# terse builders used across the suite
X = symbol("x")
Y = symbol("y")
C = symbol("c")


def sin(e):
    return unary("sin", e)


def cos(e):
    return unary("cos", e)


def tan(e):
    return unary("tan", e)


def log(e):
    return unary("log", e)


def exp(e):
    return unary("exp", e)


def sqrt(e):
    return unary("sqrt", e)
