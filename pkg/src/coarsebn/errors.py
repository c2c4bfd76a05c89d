"""Exception types shared across the package."""


class CoarseBNError(Exception):
    """Base class for errors raised by this package."""


class FormatError(CoarseBNError):
    """Malformed network or dataset file."""


class DataError(CoarseBNError):
    """Inputs that do not bind together: unknown variables, labels, shapes."""


class NumericalError(CoarseBNError):
    """Numerical failure: budget exceeded, zero support, non-convergence."""


class ZeroSupportError(NumericalError):
    """An observation or completion has probability zero under the model."""


class BudgetError(NumericalError):
    """Problem size exceeds an enumeration budget."""
