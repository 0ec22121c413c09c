"""Exception taxonomy shared across the package.

The CLI maps these onto distinct exit codes, so library code should raise
ValidationError for bad inputs/configs and NumericalError (or its
ConvergenceError subclass) for floating-point trouble.
"""


class ValidationError(ValueError):
    """Input, configuration, or model constraint violated."""


class NumericalError(ArithmeticError):
    """A numerical routine produced overflow, NaN, or an untrustworthy result."""


class ConvergenceError(NumericalError):
    """An iterative scheme exhausted its iteration budget."""
