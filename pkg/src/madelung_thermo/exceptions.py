"""Exception hierarchy.

Validation problems derive from ``ValueError`` (CLI exit code 1); numerical
failures derive from :class:`NumericalError` (CLI exit code 2).
"""


class MadelungError(Exception):
    """Base class for all package errors."""


class ValidationError(MadelungError, ValueError):
    """An input parameter or option is out of its admissible range."""


class NumericalError(MadelungError):
    """A solve or an analysis step failed numerically."""


class MaxStepsExceeded(NumericalError):
    """The integrator used its step budget before reaching the blow-up."""


class ToleranceFailure(NumericalError):
    """The integrator step size underflowed before reaching the cut-off."""


class OutOfSupport(NumericalError, ValueError):
    """A radius at or beyond the blow-up radius was requested."""


class InconsistentAsymptote(NumericalError):
    """The blow-up radius estimator does not settle across the tail points."""


class QuadratureFailure(NumericalError):
    """Composite quadrature did not converge under refinement."""


class InsufficientData(NumericalError, ValueError):
    """Too few rows to perform a fit or draw a figure."""


class DegenerateDerivative(NumericalError):
    """A finite-difference derivative is too small to be inverted."""


class UnknownFigureTag(MadelungError, ValueError):
    """The requested figure tag is not one of the known figures."""
