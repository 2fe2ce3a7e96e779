"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the region where a quantity is defined."""


class ConvergenceError(RuntimeError):
    """The iterative eigensolver failed to converge or produced an invalid spectrum."""
