"""Exception hierarchy shared across the toolkit."""


class SpendSeqError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 2


class DataError(SpendSeqError):
    """Input data cannot support the requested computation."""


class EmptySampleError(DataError):
    pass


class DegenerateSampleError(DataError):
    """Sample has no spread where the estimator needs some."""


class ConvergenceError(SpendSeqError):
    """An iterative solver stopped before meeting its tolerance.

    ``last`` holds the final iterate (or whatever partial state the solver
    can offer) so callers can inspect how far it got.
    """

    exit_code = 3

    def __init__(self, message, last=None, trajectory=None):
        super().__init__(message)
        self.last = last
        self.trajectory = trajectory
