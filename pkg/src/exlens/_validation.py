"""Input validation helpers shared by the estimators and experiment code."""

import numbers

import numpy as np

from .exceptions import GeometryError


def check_positive(value, name):
    """Return ``value`` as float, raising ``GeometryError`` unless finite and > 0."""
    if not isinstance(value, numbers.Real) or isinstance(value, bool):
        raise GeometryError(f"{name} must be a real number, got {value!r}")
    value = float(value)
    if not np.isfinite(value) or value <= 0:
        raise GeometryError(f"{name} must be positive and finite, got {value!r}")
    return value


def check_angle(phi, name="phi"):
    phi = float(phi)
    if not np.isfinite(phi) or abs(phi) >= np.pi / 2:
        raise GeometryError(f"{name} must lie in (-pi/2, pi/2), got {phi!r}")
    return phi


def check_count(value, name, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise ValueError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_complex_vector(x, n=None, name="r"):
    """Coerce ``x`` to a 1-D complex128 array, optionally of length ``n``.

    A ``(1, n)`` row is accepted and flattened so that single snapshots can be
    passed the way sklearn passes one sample.
    """
    arr = np.asarray(x)
    if arr.ndim == 2 and arr.shape[0] == 1:
        arr = arr[0]
    if arr.ndim != 1:
        raise ValueError(f"{name} must be a 1-D vector, got shape {arr.shape}")
    arr = arr.astype(np.complex128, copy=False)
    if n is not None and arr.shape[0] != n:
        raise ValueError(f"{name} must have length {n}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or infinite entries")
    return arr


def check_complex_matrix(x, n_cols=None, name="X"):
    arr = np.asarray(x)
    if arr.ndim == 1:
        arr = arr[np.newaxis, :]
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    arr = arr.astype(np.complex128, copy=False)
    if n_cols is not None and arr.shape[1] != n_cols:
        raise ValueError(f"{name} must have {n_cols} columns, got {arr.shape[1]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or infinite entries")
    return arr


def check_mask(mask, n):
    """Return a boolean mask of length ``n``.

    ``None`` selects every antenna; an integer array is read as antenna
    indices.
    """
    if mask is None:
        return np.ones(n, dtype=bool)
    mask = np.asarray(mask)
    if np.issubdtype(mask.dtype, np.integer):
        out = np.zeros(n, dtype=bool)
        out[mask] = True
        mask = out
    elif mask.dtype != bool:
        raise ValueError("selection mask must be boolean or integer indices")
    if mask.shape != (n,):
        raise ValueError(f"selection mask must have shape ({n},), got {mask.shape}")
    if not mask.any():
        raise ValueError("selection mask selects no antenna")
    return mask
