"""Shared exception types."""


class UsageError(Exception):
    """Caller violated a contract: registry mismatch, unknown variable, bad parameters."""


class DomainError(Exception):
    """Input outside the mathematical domain of the operation."""


class DegeneratePointError(DomainError):
    """Matrix point with colliding eigenvalues."""


class ExactDivisionError(Exception):
    """Polynomial division left a nonzero remainder where exactness was asserted."""


class UnsupportedModeError(Exception):
    """Operation not available in the algebra's current mode."""


class QuadratureError(Exception):
    """Numerical integration failed to converge or disagreed with its error estimate."""


class InternalError(Exception):
    """Invariant that should be unreachable was violated."""
