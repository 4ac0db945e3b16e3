"""Exception types shared across the package."""


class FrmpeError(Exception):
    """Base class for all package-specific errors."""


class DomainError(FrmpeError, ValueError):
    """A physical parameter is outside its admissible domain."""


class DegenerateBasisError(FrmpeError):
    """The polaron Gram matrix is numerically singular (norm form <= 0)."""


class IllConditionedError(FrmpeError):
    """The polaron Gram matrix exceeds the allowed condition number."""


class NonConvergedError(FrmpeError):
    """An adaptive computation hit its budget before reaching tolerance.

    Carries the best estimate obtained so far in ``best`` (type depends on
    the caller: an EDResult for exact diagonalization, a float for
    quadrature).
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class AllRestartsFailedError(FrmpeError):
    """Every optimizer restart ended in an ill-conditioned basis."""
