"""Exception hierarchy shared by the solver modules."""

from __future__ import annotations


class RegimeRKFError(Exception):
    """Base class for every error raised by this package."""


class ModelError(RegimeRKFError, ValueError):
    """A market model violates one or more invariants.

    ``violations`` holds every problem found, not only the first one.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


class InvalidGenerator(ModelError):
    pass


class InvalidRegime(ModelError):
    pass


class DimensionMismatch(ModelError):
    pass


class GridTooSmall(RegimeRKFError, ValueError):
    pass


class OutOfSpan(RegimeRKFError, ValueError):
    pass


class GammaNotComputed(RegimeRKFError):
    pass


class NumericalFailure(RegimeRKFError, ArithmeticError):
    """Raised when a trial step cannot be evaluated; the stepper shrinks ``k``."""


class DegenerateSqrtArgument(NumericalFailure):
    pass


class NegativeRadicand(NumericalFailure):
    pass


class ComplexRoot(NumericalFailure):
    pass


class StepStalled(NumericalFailure):
    pass


class NoConvergence(NumericalFailure):
    pass


class SchemaError(RegimeRKFError, ValueError):
    """Config text does not match the schema; ``path`` points at the key."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")
