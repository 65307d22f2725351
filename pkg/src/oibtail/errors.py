"""Exception types shared across the package."""


class OIBError(Exception):
    """Base class for all package errors."""


class ParameterError(OIBError, ValueError):
    """An argument is outside the domain an operation accepts."""


class FormatError(OIBError, ValueError):
    """Input text does not match the declared schema."""


class DegenerateSeriesError(ParameterError):
    """A series has zero variance (constant, e.g. a halted stock)."""


class EstimationError(OIBError, RuntimeError):
    """An estimator failed to converge.

    ``diagnostics`` carries whatever the best attempt produced so callers can
    report it.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})
