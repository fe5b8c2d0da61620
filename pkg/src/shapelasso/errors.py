"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """Raised when user-supplied data or parameters violate a precondition."""


class SolverFailure(RuntimeError):
    """Raised when a QP backend cannot produce a solution meeting its contract."""


class OracleSizeError(ValueError):
    """Raised when a problem is too large for the brute-force oracle."""
