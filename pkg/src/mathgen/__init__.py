"""Symbolic-mathematics dataset toolkit: expression trees with a bijective
prefix codec, exact counting, uniform tree sampling, differentiation,
canonicalizing simplification, dataset generators for integration and ODE
tasks, and numeric verification of candidate solutions."""

import sys as _sys

__version__ = "0.1.0"

# expression trees nest as deep as the 512-token dataset cap allows;
# intermediate derivative trees go deeper before they are simplified
_sys.setrecursionlimit(max(_sys.getrecursionlimit(), 20_000))

from .expr import (  # noqa: E402
    Expr,
    GrammarConfig,
    MalformedSequenceError,
    parse_prefix,
    to_infix,
    to_prefix,
    to_prefix_str,
)
from .simplify import normalize_equation, reduce_constants, simplify  # noqa: E402
from .calculus import differentiate, evaluate, is_valid_expression  # noqa: E402
from .verify import ProbeConfig, Verdict, check_integral, check_ode, expr_equiv  # noqa: E402

__all__ = [
    "Expr",
    "GrammarConfig",
    "MalformedSequenceError",
    "ProbeConfig",
    "Verdict",
    "check_integral",
    "check_ode",
    "differentiate",
    "evaluate",
    "expr_equiv",
    "is_valid_expression",
    "normalize_equation",
    "parse_prefix",
    "reduce_constants",
    "simplify",
    "to_infix",
    "to_prefix",
    "to_prefix_str",
    "__version__",
]
