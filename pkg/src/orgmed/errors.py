"""Exception hierarchy.

Each top-level class maps to one CLI exit code (see :mod:`orgmed.cli`).
"""


class OrgmedError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 3


class ConfigError(OrgmedError, ValueError):
    """Invalid configuration, usage, or intervention specification."""

    exit_code = 1


class DataError(OrgmedError, ValueError):
    """Unreadable, malformed, or inconsistent input data."""

    exit_code = 2


class EstimationError(OrgmedError):
    """A model fit or estimator could not produce a result."""

    exit_code = 3


class FitError(EstimationError):
    pass


class RankDeficientError(FitError):
    pass


class InsufficientDataError(FitError):
    pass


class ConvergenceError(FitError):
    """IRLS did not converge; ``model`` carries the last iterate."""

    def __init__(self, message, model=None):
        super().__init__(message)
        self.model = model


class ValidationFailure(OrgmedError):
    exit_code = 4
