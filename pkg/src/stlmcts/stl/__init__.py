from .ast import (
    UNBOUNDED,
    Always,
    And,
    Eventually,
    Formula,
    Interval,
    Not,
    Or,
    Predicate,
    Top,
    Until,
    signals,
)
from .monitor import (
    EmptyWindowError,
    MissingSignalError,
    STLEvaluationError,
    Trace,
    robustness,
    robustness_prefix,
    robustness_signal,
    satisfies,
)
from .parser import STLSyntaxError, parse_formula, print_formula

__all__ = [
    "UNBOUNDED", "Always", "And", "Eventually", "Formula", "Interval", "Not", "Or",
    "Predicate", "Top", "Until", "signals", "EmptyWindowError", "MissingSignalError",
    "STLEvaluationError", "Trace", "robustness", "robustness_prefix", "robustness_signal",
    "satisfies", "STLSyntaxError", "parse_formula", "print_formula",
]
