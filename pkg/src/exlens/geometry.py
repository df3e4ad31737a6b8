"""Lens designs, antenna placement and the closed-form geometry quantities
(quadratic phase coefficient, linear phase slope, energy-window edges).

Angles on the focal arc are carried as ``sin(theta)`` throughout, since the
antennas sit on a uniform ``sin(theta) = n/N`` grid.
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ._validation import check_angle, check_positive
from .exceptions import FarFieldDegenerateError, GeometryError

__all__ = [
    "LensVariant",
    "LensDesign",
    "ArrayKind",
    "ArrayGeometry",
    "SourcePoint",
    "WindowDescriptor",
    "lens_phase_profile",
    "alpha",
    "alpha_raw",
    "beta",
    "window_edges",
    "rayleigh_distance",
]


class LensVariant(str, Enum):
    DESIGN1 = "design1"  # plane wave at normal incidence focuses on the arc centre
    DESIGN2 = "design2"  # spherical wave from the left focal point c0 focuses on the arc centre


@dataclass(frozen=True)
class LensDesign:
    """EM lens of length ``aperture`` (m) on the y-axis with its focal arc of
    radius ``focal_length``.

    ``source_focal_distance`` (F0) is only used by Design 2.
    """

    variant: LensVariant
    aperture: float
    focal_length: float
    wavelength: float
    source_focal_distance: float = None

    def __post_init__(self):
        object.__setattr__(self, "variant", LensVariant(self.variant))
        check_positive(self.aperture, "aperture")
        check_positive(self.focal_length, "focal_length")
        check_positive(self.wavelength, "wavelength")
        if self.variant is LensVariant.DESIGN2:
            if self.source_focal_distance is None:
                raise GeometryError("Design 2 requires source_focal_distance (F0)")
            check_positive(self.source_focal_distance, "source_focal_distance")
        if self.electrical_aperture < 1:
            raise GeometryError("electrical aperture D/lambda must be >= 1")

    @classmethod
    def design1(cls, aperture, focal_length, wavelength):
        return cls(LensVariant.DESIGN1, aperture, focal_length, wavelength)

    @classmethod
    def design2(cls, aperture, focal_length, source_focal_distance, wavelength):
        return cls(LensVariant.DESIGN2, aperture, focal_length, wavelength,
                   source_focal_distance)

    @property
    def wavenumber(self):
        return 2 * np.pi / self.wavelength

    @property
    def electrical_aperture(self):
        return self.aperture / self.wavelength

    @property
    def n_antennas(self):
        return 2 * int(np.floor(self.electrical_aperture + 1e-9)) + 1

    @property
    def inverse_f0(self):
        """``1/F0`` for Design 2 and 0 for Design 1 (F0 -> infinity)."""
        if self.variant is LensVariant.DESIGN2:
            return 1.0 / self.source_focal_distance
        return 0.0


class ArrayKind(str, Enum):
    LENS_FOCAL_ARC = "lens"
    ULA_HALF_WAVELENGTH = "ula"


@dataclass(frozen=True)
class ArrayGeometry:
    """Antenna placement: lens focal-arc samples or a half-wavelength ULA."""

    kind: ArrayKind
    n_antennas: int
    wavelength: float
    _offsets: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "kind", ArrayKind(self.kind))
        if self.n_antennas < 3 or self.n_antennas % 2 == 0:
            raise GeometryError(f"n_antennas must be odd and >= 3, got {self.n_antennas}")
        check_positive(self.wavelength, "wavelength")
        half = (self.n_antennas - 1) // 2
        offsets = np.arange(-half, half + 1)
        offsets.setflags(write=False)
        object.__setattr__(self, "_offsets", offsets)

    @classmethod
    def lens(cls, design):
        return cls(ArrayKind.LENS_FOCAL_ARC, design.n_antennas, design.wavelength)

    @classmethod
    def ula(cls, electrical_aperture, wavelength):
        n = 2 * int(np.floor(electrical_aperture + 1e-9)) + 1
        return cls(ArrayKind.ULA_HALF_WAVELENGTH, n, wavelength)

    @property
    def half_size(self):
        return (self.n_antennas - 1) // 2

    @property
    def indices(self):
        """Element indices ``n = -N..N``."""
        return self._offsets

    @property
    def sin_theta(self):
        if self.kind is not ArrayKind.LENS_FOCAL_ARC:
            raise GeometryError("sin_theta is only defined for a lens focal arc")
        return self._offsets / self.half_size

    @property
    def spacing(self):
        if self.kind is not ArrayKind.ULA_HALF_WAVELENGTH:
            raise GeometryError("element spacing is only defined for a ULA")
        return self.wavelength / 2

    @property
    def pitch(self):
        """Spacing of adjacent lens antennas in sin(theta)."""
        return 1.0 / self.half_size


@dataclass(frozen=True)
class SourcePoint:
    """Point source at distance ``d`` (m) and angle ``phi`` (rad) from the x-axis."""

    d: float
    phi: float

    def __post_init__(self):
        object.__setattr__(self, "d", check_positive(self.d, "d"))
        object.__setattr__(self, "phi", check_angle(self.phi))

    @property
    def xy(self):
        return np.array([-self.d * np.cos(self.phi), self.d * np.sin(self.phi)])


@dataclass(frozen=True)
class WindowDescriptor:
    """Energy-focusing window in sin(theta) units.

    ``v1``/``v2`` are the exact zero points of the two erf terms; the
    ``*_approx`` fields are the far-from-aperture approximations.
    """

    v1: float
    v2: float
    center_approx: float
    width_approx: float

    @property
    def center(self):
        return 0.5 * (self.v1 + self.v2)

    @property
    def width(self):
        return abs(self.v1 - self.v2)

    @property
    def lower(self):
        return min(self.v1, self.v2)

    @property
    def upper(self):
        return max(self.v1, self.v2)


def lens_phase_profile(design, y):
    """Fixed phase shift psi(p) of the lens at aperture position ``y``.

    The constant phi0 is normalised so that the phase at the focal point is
    2*pi (Design 1), or phi0 - k0*F0 = 2*pi (Design 2).
    """
    y = np.asarray(y, dtype=float)
    if np.any(np.abs(y) > design.aperture / 2 * (1 + 1e-12)):
        raise GeometryError("position lies outside the lens aperture")
    k0 = design.wavenumber
    F = design.focal_length
    to_focus = np.hypot(F, y)
    if design.variant is LensVariant.DESIGN1:
        phase = 2 * np.pi - k0 * to_focus
    else:
        F0 = design.source_focal_distance
        phase = (2 * np.pi + k0 * F0) - k0 * (np.hypot(F0, y) + to_focus)
    return phase[()] if phase.ndim == 0 else phase


def alpha(design, sin_theta, source):
    """Quadratic phase coefficient (rad/m^2) of the aperture integrand."""
    return alpha_raw(design, sin_theta, source.d, source.phi)


def alpha_raw(design, sin_theta, d, phi):
    """``alpha`` for bare (d, phi) arrays; broadcasts over all arguments."""
    lam = design.wavelength
    s = np.asarray(sin_theta, dtype=float)
    return (np.pi * s**2 / (lam * design.focal_length)
            - np.pi * np.cos(phi) ** 2 / (lam * np.asarray(d, dtype=float))
            + np.pi * design.inverse_f0 / lam)


def beta(sin_theta, phi, wavelength):
    return (np.asarray(sin_theta, dtype=float) - np.sin(phi)) / wavelength


def window_edges(design, source):
    """Exact window edges (zero points of both erf terms) and the approximate
    centre/width valid when F, F0, d are much larger than the aperture."""
    D = design.aperture
    F = design.focal_length
    phi = source.phi
    d = source.d
    ratio = F / D
    curvature = F * design.inverse_f0 - F * np.cos(phi) ** 2 / d
    disc1 = ratio**2 - (curvature - 2 * F * np.sin(phi) / D)
    disc2 = ratio**2 - (curvature + 2 * F * np.sin(phi) / D)
    if disc1 < 0 or disc2 < 0:
        raise FarFieldDegenerateError("window edge quadratics have no real root")
    # Cancellation-free forms of -r + sqrt(r^2 - c) and r - sqrt(r^2 - c).
    c1 = curvature - 2 * F * np.sin(phi) / D
    c2 = curvature + 2 * F * np.sin(phi) / D
    v1 = -c1 / (ratio + np.sqrt(disc1))
    v2 = c2 / (ratio + np.sqrt(disc2))
    if not (-1 < v1 < 1 and -1 < v2 < 1):
        raise FarFieldDegenerateError("window edges fall outside the focal arc")
    width_approx = D * abs(design.inverse_f0 - np.cos(phi) ** 2 / d)
    return WindowDescriptor(float(v1), float(v2), float(np.sin(phi)), float(width_approx))


def rayleigh_distance(D, wavelength):
    D = check_positive(D, "D")
    wavelength = check_positive(wavelength, "wavelength")
    return 2 * D**2 / wavelength
