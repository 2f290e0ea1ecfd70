"""Exception types shared across the package."""


class ViscofixError(Exception):
    """Base class for all package errors."""


class UsageError(ViscofixError, ValueError):
    """Caller passed arguments that violate an operation's preconditions."""


class ConstructionError(ViscofixError, ValueError):
    """An object could not be built from the given parameters."""


class UnsupportedOperation(ViscofixError):
    """The operation is not available for this kind of object."""


class NumericalError(ViscofixError, RuntimeError):
    """An iterative or quadrature routine did not reach its tolerance.

    ``best`` holds the best iterate or estimate found and ``achieved`` the
    error bound that was actually attained.
    """

    def __init__(self, message, best=None, achieved=None, report=None):
        super().__init__(message)
        self.best = best
        self.achieved = achieved
        self.report = report
