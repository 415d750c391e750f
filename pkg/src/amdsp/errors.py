"""Exception types shared across the package."""


class AmdspError(Exception):
    """Base class for errors raised by this package."""


class EmptyAcceptanceRegionError(AmdspError):
    """sigma exceeds sigma0(p): no process mean attains the requested fraction defective."""


class InfeasibleDesignError(AmdspError):
    """The two-point requirement cannot be met by any plan in the searched family."""


class QuadratureConvergenceError(AmdspError):
    """A quadrature error estimate exceeded the configured tolerance."""

    def __init__(self, message, estimate):
        super().__init__(message)
        self.estimate = estimate
