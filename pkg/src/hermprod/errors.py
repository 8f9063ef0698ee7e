"""Exception hierarchy shared by every module of the package."""


class HermprodError(Exception):
    """Base class for all package errors."""


class NumericalError(HermprodError, ArithmeticError):
    """A numerical routine failed to reach its accuracy target."""


class NonConvergenceError(NumericalError):
    """Quadrature or series did not converge within its budget."""


class BracketingError(NumericalError):
    """A root could not be bracketed; the inputs violate a precondition."""


class BranchTrackingError(NumericalError):
    """Continuation of an algebraic root lost track of the physical branch."""


class GammaPoleError(HermprodError, ValueError):
    """Gamma function evaluated at a non-positive integer."""


class ContourPlacementError(HermprodError, ValueError):
    """Integration contour crosses or touches a pole of the integrand."""


class OrderingError(HermprodError, ValueError):
    """Eigenvalue arguments are not ordered as required."""


class OriginSingularityError(HermprodError, ValueError):
    """A weight function was requested at its (divergent) value at the origin."""


class DimensionError(HermprodError, ValueError):
    """Matrix dimensions are incompatible with the requested construction."""
