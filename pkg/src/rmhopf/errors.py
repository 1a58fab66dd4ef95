"""Exception hierarchy shared by all rmhopf modules."""


class RMHopfError(Exception):
    """Base class for every error raised by rmhopf."""


class DomainError(RMHopfError, ValueError):
    """An input lies outside the mathematical domain of an operation."""


class InfeasibleEquilibriumError(DomainError):
    """The coexistence equilibrium does not lie in the open quadrant."""


class NotHurwitzError(DomainError):
    """Stationary LNA quantities are undefined for a non-Hurwitz Jacobian."""


class SingularSystemError(DomainError):
    pass


class NotPSDError(DomainError):
    pass


class NotPositiveDefiniteError(DomainError):
    pass


class UnsupportedClosureError(DomainError):
    """The closure has no integer-valued jump representation."""


class InsufficientDataError(RMHopfError, ValueError):
    pass


class StepFailure(RMHopfError, RuntimeError):
    """Covariance factorization failed inside a diffusion step."""


class ReplicateError(RMHopfError):
    """Wraps an exception raised while running one ensemble replicate."""

    def __init__(self, index, cause):
        super().__init__(f"replicate {index}: {cause}")
        self.index = index
        self.cause = cause
