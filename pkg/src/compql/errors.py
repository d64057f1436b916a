"""Exception hierarchy.

Every error raised by the package derives from :class:`CompqlError`.  The
three intermediate classes map onto the command-line exit codes (1 for
configuration, 2 for data, 3 for numerical failure).
"""


class CompqlError(Exception):
    """Base class for all package errors."""

    exit_code = 3


class ConfigError(CompqlError, ValueError):
    """Bad arguments, malformed scenario files, missing columns."""

    exit_code = 1


class DataError(CompqlError, ValueError):
    """The data cannot be used as supplied."""

    exit_code = 2


class NumericalError(CompqlError, ArithmeticError):
    """A numerical procedure failed."""

    exit_code = 3


class InvalidDimensionError(DataError):
    pass


class ContractViolationError(DataError):
    """Input violates a documented precondition (e.g. asymmetric matrix)."""


class DegenerateProbabilityError(DataError):
    """A composition has a zero part where strictly positive parts are needed."""


class ZerosUnsupportedError(DataError):
    """Log-ratio methods cannot handle zero-valued parts."""


class InsufficientDataError(DataError):
    pass


class IdentifiabilityError(DataError):
    """A contrast has no identifiable component under the model constraint."""


class NumericOverflowError(NumericalError):
    pass


class RankDeficiencyError(NumericalError):
    def __init__(self, message, columns=()):
        super().__init__(message)
        self.columns = tuple(columns)


class ConvergenceError(NumericalError):
    """Iteration limit reached; ``trace`` holds one row per iteration."""

    def __init__(self, message, trace=()):
        super().__init__(message)
        self.trace = list(trace)
