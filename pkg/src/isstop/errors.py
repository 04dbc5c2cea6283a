"""Exception and warning types raised across the package."""


class IsStopError(Exception):
    """Base class for errors raised by :mod:`isstop`."""


class DataError(IsStopError, ValueError):
    """Input samples or weights violate their invariants."""


class DimensionMismatchError(IsStopError, ValueError):
    """Two objects built for different dimensions were combined."""


class DegenerateWeightsError(IsStopError, ZeroDivisionError):
    """The weight sum is zero so a ratio estimator is undefined."""


class EmptyStatsError(IsStopError, ValueError):
    """An estimator was requested from statistics holding no samples."""


class NotPositiveDefiniteError(IsStopError, ValueError):
    """Cholesky factorization met a non-positive pivot."""

    def __init__(self, pivot, value=None):
        self.pivot = pivot
        self.value = value
        msg = f"matrix is not positive definite (pivot {pivot}"
        if value is not None:
            msg += f", value {value:.3g}"
        super().__init__(msg + ")")


class SingularCovarianceError(IsStopError, ValueError):
    """A covariance estimate is singular or numerically close to it."""

    def __init__(self, which, detail=""):
        self.which = which
        super().__init__(f"{which} is singular{': ' + detail if detail else ''}")


class InfiniteVarianceError(IsStopError, ValueError):
    """The importance sampling estimator has no finite asymptotic variance."""


class UndefinedOESSError(IsStopError, ValueError):
    """Owen's ESS is undefined because every ``|h_j| w`` is zero."""


class DomainError(IsStopError, ValueError):
    """Parameters lie outside the support of a model."""


class DegenerateTargetWarning(UserWarning):
    """The target covariance estimate is singular; M-ESS reported as zero."""


class InfiniteVarianceWarning(UserWarning):
    """A Gaussian problem lies outside the finite-variance region."""
