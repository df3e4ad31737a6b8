"""Exception types raised across the package."""


class ExLensError(Exception):
    """Base class for all package errors."""


class NumericalError(ExLensError, ArithmeticError):
    """A numeric kernel left its representable or convergent range."""


class QuadratureError(NumericalError):
    """Adaptive quadrature hit its subdivision limit before converging."""


class SingularMatrixError(NumericalError):
    """A matrix that must be inverted is singular or too ill-conditioned."""


class GeometryError(ExLensError, ValueError):
    """Invalid lens/array parameters or a geometry mismatch."""


class NoWindowFoundError(ExLensError):
    """Power detection found no energy-focusing window above threshold."""


class FarFieldDegenerateError(ExLensError):
    """Window edges imply a non-positive curvature term (source at infinity)."""


class ConfigError(ExLensError, ValueError):
    """Scenario configuration failed validation.

    ``field`` is the dotted path of the offending entry, e.g.
    ``"lens.wavelength"``.
    """

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class FarFieldWarning(UserWarning):
    """Coarse distance estimate was capped at the configured maximum."""
