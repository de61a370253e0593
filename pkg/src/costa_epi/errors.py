"""Exception types raised across the package."""


class EpiError(ValueError):
    """Base class for all domain errors raised by costa_epi."""


class DimensionMismatchError(EpiError):
    pass


class NotPSDError(EpiError):
    """A matrix required to be positive semidefinite is not.

    ``eigenvalue`` holds the offending (most negative) eigenvalue.
    """

    def __init__(self, message, eigenvalue=None):
        super().__init__(message)
        self.eigenvalue = eigenvalue


class SingularMatrixError(EpiError):
    pass


class NotCommutingError(EpiError):
    pass


class EigenSolverError(EpiError):
    pass


class DomainError(EpiError):
    pass
