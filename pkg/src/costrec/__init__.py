"""costrec: recurrence extraction for a higher-order language with inductive
types, interpreted in pluggable denotational size models and verified
empirically against the operational cost semantics.
"""

__version__ = "0.1.0"

from .cost_eval import EvalResult, eval_expr
from .extract import complexity_type, extract_program, potential_type
from .models import make_model, value_potential
from .source_ast import parse_expr, parse_program, pretty
from .typecheck import check_program

__all__ = [
    "EvalResult",
    "check_program",
    "complexity_type",
    "eval_expr",
    "extract_program",
    "make_model",
    "parse_expr",
    "parse_program",
    "potential_type",
    "pretty",
    "value_potential",
    "__version__",
]
