"""Exception hierarchy shared across the package."""


class BGCuSumError(Exception):
    """Base class for all package errors."""


class ModelError(BGCuSumError, ValueError):
    """Invalid distribution or detector configuration."""


class CalibrationError(BGCuSumError):
    """Bin boundaries or thresholds could not be determined."""


class InsufficientDataError(CalibrationError):
    """Fewer reference samples than requested bins."""


class IngestionError(BGCuSumError, ValueError):
    """Non-finite or malformed observations."""


class AbsoluteContinuityError(BGCuSumError, ValueError):
    """Post-change model puts mass where the pre-change model has none."""


class DivergentBoundError(BGCuSumError, ValueError):
    """Moment envelope is infinite for the requested bin count."""


class NonTerminationError(BGCuSumError):
    """Search for a bin count exceeded its cap."""


class InconclusiveError(BGCuSumError):
    """A Monte Carlo estimate has no usable trials."""
