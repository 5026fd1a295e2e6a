"""Exception hierarchy shared by all modules."""


class UnicornLabError(Exception):
    """Base class for every error raised by the library."""


class DomainError(UnicornLabError, ValueError):
    """A point or direction lies outside the domain of a field."""


class RangeError(UnicornLabError, ValueError):
    """A scalar parameter is outside its admissible range."""


class PoleError(DomainError):
    """A direction is too close to the Finsleroid axis for the requested order.

    The energy is only twice differentiable at the axis directions, so
    evaluations of order two use a narrow exclusion cone and evaluations of
    order three and higher a wide one.
    """

    def __init__(self, message, angle=None, cone=None):
        super().__init__(message)
        self.angle = angle
        self.cone = cone


class KindError(UnicornLabError, TypeError):
    """The operation is not defined for this kind of metric."""


class SingularHessian(UnicornLabError, ArithmeticError):
    """The fundamental tensor is not positive definite enough to invert."""


class HypothesisError(UnicornLabError, ValueError):
    """A background does not satisfy the hypothesis of a construction."""


class ODEError(UnicornLabError, ArithmeticError):
    """The transport integrator could not meet its tolerance."""


class ConvexityError(UnicornLabError, ArithmeticError):
    """The metric fails strong convexity at a quadrature node."""


class ConsistencyError(UnicornLabError, ArithmeticError):
    """Two independent evaluations of the same quantity disagree."""


class ConfigError(UnicornLabError, ValueError):
    """A run configuration is malformed."""
