"""Exception and warning types raised across the package."""


class RisPosError(Exception):
    """Base class for all package errors."""


class DegenerateGeometry(RisPosError, ValueError):
    """A position or direction for which an angle or inverse map is undefined."""


class NotPerfectSquare(RisPosError, ValueError):
    pass


class DimensionMismatch(RisPosError, ValueError):
    pass


class InvalidPilot(RisPosError, ValueError):
    pass


class IllConditioned(RisPosError, ArithmeticError):
    pass


class SubspaceTooSmall(RisPosError, ValueError):
    pass


class SingularCovariance(RisPosError, ArithmeticError):
    pass


class ConfigError(RisPosError, ValueError):
    pass


class EstimationWarning(UserWarning):
    """Base class for recoverable numerical conditions that are flagged, not raised."""


class PeakDeficit(EstimationWarning):
    """Fewer spectrum peaks than expected paths were found."""


class SingularFIM(EstimationWarning):
    """A Fisher information matrix had to be regularized before inversion."""


class NonConvergence(EstimationWarning):
    """An iterative solver stopped at its iteration limit."""
