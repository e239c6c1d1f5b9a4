"""Exception types shared across the toolkit.

Every failure mode that callers are expected to branch on gets its own
class; plain ValueError is reserved for programming errors (bad shapes,
wrong argument combinations) that no caller should catch.
"""


class HartreelabError(Exception):
    """Base class for all toolkit errors."""


class ParameterDomainError(HartreelabError):
    """Parameters outside the admissible set (n < 3, alpha outside (0, n), ...)."""


class ParameterRangeError(HartreelabError):
    """A formula left the floating-point range; names the offending subexpression."""


class AccuracyError(HartreelabError):
    """A quadrature or iteration did not reach the requested tolerance.

    The achieved error estimate is carried so callers can decide whether
    the partial accuracy is still useful.
    """

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class IntegrabilityError(HartreelabError):
    """Declared decay exponents make an integral diverge; raised before quadrature."""


class GridError(HartreelabError):
    """Radial or cylinder grid violates its construction contract."""


class SamplingError(HartreelabError):
    """A field was sampled where it is not defined (the singular point, an inversion center)."""


class UnsupportedDimensionError(HartreelabError):
    """Sphere quadrature requested for a dimension outside {3, 4, 5}."""


class ConvergenceError(HartreelabError):
    """An iterative solve ran out of iterations without meeting its tolerance."""
