"""Exception hierarchy for fracwalk."""

from typing import Optional


class FracwalkError(Exception):
    """Base class of every error raised by the library."""


class ParameterError(FracwalkError, ValueError):
    """A precondition on the inputs is violated.

    ``bound`` carries the admissibility bound that was exceeded, when there is one.
    """

    def __init__(self, message: str, bound: Optional[float] = None):
        super().__init__(message)
        self.bound = bound


class SingularAlphaError(ParameterError):
    """alpha = 1 requested for the Grunwald-Letnikov walk."""


class QuadratureError(FracwalkError, RuntimeError):
    """Adaptive quadrature ran out of subintervals before reaching tolerance."""


class ToleranceError(FracwalkError):
    """A configured convergence tolerance was not met."""


class OutputError(FracwalkError, OSError):
    """Writing or reading an artifact failed."""
