"""Multipath channels, received-signal synthesis and SNR bookkeeping."""

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._validation import check_angle, check_complex_vector, check_positive
from .exceptions import GeometryError
from .geometry import ArrayKind, SourcePoint
from .numerics import make_rng, sample_complex_gaussian
from .response import response_vector, ula_response_vector

__all__ = [
    "PathParams",
    "UserChannel",
    "build_channel",
    "synthesize_received",
    "receive_snr_db",
    "noise_var_for_target_snr",
    "multiuser_received",
    "draw_preset_paths",
]


@dataclass(frozen=True)
class PathParams:
    """One propagation path: complex gain ``g``, distance ``d`` (m), angle ``phi`` (rad)."""

    g: complex
    d: float
    phi: float

    def __post_init__(self):
        object.__setattr__(self, "g", complex(self.g))
        object.__setattr__(self, "d", check_positive(self.d, "d"))
        object.__setattr__(self, "phi", check_angle(self.phi))

    @property
    def source(self):
        return SourcePoint(self.d, self.phi)


@dataclass(frozen=True)
class UserChannel:
    paths: tuple
    h: np.ndarray

    @property
    def n_paths(self):
        return len(self.paths)


def _path_response(design, geom, path):
    if geom.kind is ArrayKind.LENS_FOCAL_ARC:
        return response_vector(design, geom, path.source)
    return ula_response_vector(geom, path.source)


def build_channel(design, geom, paths: Sequence[PathParams]) -> UserChannel:
    """Superpose gain-weighted path responses (lens or ULA per ``geom``).

    ``design`` is ignored for a ULA geometry and may be None there.
    """
    paths = tuple(paths)
    if not paths:
        raise GeometryError("a channel needs at least one path")
    h = np.zeros(geom.n_antennas, dtype=np.complex128)
    for p in paths:
        h += p.g * _path_response(design, geom, p)
    h.setflags(write=False)
    return UserChannel(paths, h)


def _as_vector(h):
    if isinstance(h, UserChannel):
        h = h.h
    return check_complex_vector(h, name="h")


def synthesize_received(h, noise_var, seed):
    """``r = h + n`` with ``n ~ CN(0, noise_var I)``; exact copy of h when noise_var is 0."""
    h = _as_vector(h)
    if noise_var < 0:
        raise ValueError("noise_var must be nonnegative")
    if noise_var == 0:
        return h.copy()
    return h + sample_complex_gaussian(h.size, noise_var, seed)


def receive_snr_db(h, noise_var):
    """``10 log10(h^H h / (N_a sigma^2))``."""
    h = _as_vector(h)
    if not noise_var > 0:
        raise ValueError("noise_var must be positive")
    return 10 * np.log10(np.vdot(h, h).real / (h.size * noise_var))


def noise_var_for_target_snr(h, snr_db):
    h = _as_vector(h)
    energy = np.vdot(h, h).real
    if energy == 0:
        raise GeometryError("zero channel has no defined SNR")
    return energy / (h.size * 10 ** (snr_db / 10))


def multiuser_received(channels, powers, symbols, noise_var, seed):
    """``sum_k sqrt(p_k) s_k h_k + n``."""
    hs = [_as_vector(c) for c in channels]
    powers = np.asarray(powers, dtype=float)
    symbols = np.asarray(symbols, dtype=np.complex128)
    if not (len(hs) == powers.size == symbols.size):
        raise ValueError("channels, powers and symbols must have equal length")
    if np.any(powers < 0):
        raise ValueError("powers must be nonnegative")
    H = np.stack(hs, axis=1)
    clean = H @ (np.sqrt(powers) * symbols)
    return synthesize_received(clean, noise_var, seed)


def draw_preset_paths(n_paths, seed, d_range=(20.0, 320.0), phi_max=np.pi / 5,
                      gain_range=(0.1, 1.0)):
    """Random paths for the experiment presets.

    Positions are uniform in ``d_range`` x ``[-phi_max, phi_max]``; gains have
    log-uniform magnitude in ``gain_range`` and uniform phase. This gain law is
    a stand-in, not a measured fading model.
    """
    rng = make_rng(seed)
    lo, hi = np.log(gain_range[0]), np.log(gain_range[1])
    paths = []
    for _ in range(n_paths):
        mag = np.exp(rng.uniform(lo, hi))
        g = mag * np.exp(1j * rng.uniform(0, 2 * np.pi))
        paths.append(PathParams(g, rng.uniform(*d_range), rng.uniform(-phi_max, phi_max)))
    return paths
