"""Signal temporal logic with aggregates over piecewise-constant traces."""

from .ast import (FALSE, FUNCTIONS, TRUE, EvaluationError, Formula, Interner, Node, STLError, Term,
                  WindowError, register_function)
from .evaluator import Evaluator, eval_formula, eval_robust, eval_term, evaluate_many
from .parser import Specification, STLSyntaxError, parse, parse_expr
from .sliding import ContractError, SlidingExtremum, sliding_aggregate
from .trace import TIME_TOL, Trace

__all__ = [
    "FALSE", "FUNCTIONS", "TRUE", "ContractError", "EvaluationError", "Evaluator", "Formula",
    "Interner", "Node", "STLError", "STLSyntaxError", "SlidingExtremum", "Specification", "TIME_TOL",
    "Term", "Trace", "WindowError", "eval_formula", "eval_robust", "eval_term", "evaluate_many",
    "parse", "parse_expr", "register_function", "sliding_aggregate",
]
