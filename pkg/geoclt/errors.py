"""
Exception hierarchy for geoclt.

Every class also derives from the builtin raised for the same situation
elsewhere (ValueError for bad input, RuntimeError for failed computations).
"""

from typing import Optional


class GeoCLTError(Exception):
    """Base class for all geoclt errors."""


class InvalidParameterError(GeoCLTError, ValueError):
    """A parameter or argument is outside its documented range."""


class ParseError(GeoCLTError, ValueError):
    """An input file could not be parsed."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class GraphParseError(ParseError):
    """A graph file could not be parsed."""


class RepresentationParseError(ParseError):
    """A representation file could not be parsed."""


class AperiodicityError(GeoCLTError, ValueError):
    """The adjacency matrix of a graph is not aperiodic (primitive)."""

    def __init__(self, obstruction: str):
        self.obstruction = obstruction
        super().__init__(f"graph is not aperiodic: {obstruction}")


class BudgetExceededError(GeoCLTError, ValueError):
    """A request would exceed a configured resource budget."""

    def __init__(self, message: str, budget: int):
        self.budget = budget
        super().__init__(f"{message} (budget {budget:,})")


class ConvergenceError(GeoCLTError, RuntimeError):
    """An iterative method did not converge."""

    def __init__(self, message: str, residual: float):
        self.residual = residual
        super().__init__(f"{message}; last residual {residual:.3e}")


class NumericRangeError(GeoCLTError, RuntimeError):
    """Floating point values left the representable range."""


class RepresentationError(GeoCLTError, RuntimeError):
    """A representation is unusable for the requested computation."""


class InvariantError(GeoCLTError, RuntimeError):
    """An internal invariant failed."""
