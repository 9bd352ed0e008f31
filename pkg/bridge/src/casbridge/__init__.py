"""SymPy worker speaking JSON-lines over stdio: the integrator oracle for
forward dataset generation and an independent cross-validator for generated
datasets."""

__version__ = "0.1.0"

from .convert import ConversionError, prefix_to_sympy, sympy_to_prefix, sympy_to_prefix_str
from .crossval import CrossValidationReport, cross_validate
from .worker import PROTOCOL_VERSION, handle, serve

__all__ = [
    "ConversionError",
    "CrossValidationReport",
    "PROTOCOL_VERSION",
    "cross_validate",
    "handle",
    "prefix_to_sympy",
    "serve",
    "sympy_to_prefix",
    "sympy_to_prefix_str",
    "__version__",
]
