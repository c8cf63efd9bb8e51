"""Exception types raised across the package."""


class MagviscError(Exception):
    """Base class for all package errors."""


class InvalidSpec(MagviscError, ValueError):
    pass


class EvalAtSingularity(MagviscError, ValueError):
    pass


class NotIntegrable(MagviscError, ArithmeticError):
    pass


class SizeMismatch(MagviscError, ValueError):
    pass


class PlanMismatch(MagviscError, ValueError):
    pass


class SingularDerivative(MagviscError, ValueError):
    pass


class CflViolation(MagviscError, ValueError):
    pass


class SolverFailure(MagviscError, RuntimeError):
    pass


class ModeMismatch(MagviscError, ValueError):
    pass


class InvalidTestFunction(MagviscError, ValueError):
    pass


class ParseError(MagviscError, ValueError):
    pass


class ValidationError(MagviscError, ValueError):
    """A configuration parameter violates a constraint."""

    def __init__(self, parameter: str, constraint: str):
        self.parameter = parameter
        self.constraint = constraint
        super().__init__(f"{parameter}: {constraint}")
