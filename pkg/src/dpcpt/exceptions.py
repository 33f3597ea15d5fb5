"""Exception hierarchy for dpcpt."""


class DpcptError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(DpcptError, ValueError):
    """Parameter vector does not match the model dimension."""


class NumericalError(DpcptError, ArithmeticError):
    """A non-finite value appeared in a recursion or matrix computation."""


class UnsupportedModel(DpcptError, TypeError):
    """The requested operation is only defined for the built-in linear model."""


class DataError(DpcptError, ValueError):
    """The count series cannot be used (empty, constant, negative, too short)."""


class OptimizationError(DpcptError, RuntimeError):
    """No optimizer start produced a finite objective value."""


class SingularKError(DpcptError, ArithmeticError):
    """Score covariance stayed ill-conditioned after ridge escalation."""


class DegenerateRatioError(DpcptError, ZeroDivisionError):
    """Rejection-rate ratio requested with a zero clean rate."""


class ExperimentAborted(DpcptError, RuntimeError):
    """More than 10% of Monte Carlo replications failed."""
