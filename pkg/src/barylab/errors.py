"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """Input violates a precondition (shape, range, finiteness)."""


class DomainError(ValueError):
    """Input is outside the mathematical domain of an operation."""


class ConnectivityError(ValueError):
    """Graph operation requires a connected topology."""


class ResourceLimitError(RuntimeError):
    """A configured resource cap (batch size, iteration budget) was exceeded."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class ConvergenceFailure(RuntimeError):
    """Iterative routine hit its iteration cap before reaching tolerance.

    Carries the last iterate so callers can inspect or resume.
    """

    def __init__(self, message, last_iterate=None, iterations=None, error=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.iterations = iterations
        self.error = error
