"""Exception types shared across the package."""


class SigSdpError(Exception):
    """Base class for all package errors."""


class InvalidArgument(SigSdpError, ValueError):
    """An input violates a documented precondition."""


class NumericalFailure(SigSdpError, RuntimeError):
    """An iterative numerical routine failed to converge or overflowed.

    ``diagnostics`` carries whatever the failing routine could report
    (iteration counts, residuals, brackets).
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})
