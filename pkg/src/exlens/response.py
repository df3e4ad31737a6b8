"""Array-response evaluators for the lens focal arc and the ULA benchmark.

Every lens response reduces to the quadratic-phase aperture integral

    a(alpha, beta) = int_{-D/2}^{D/2} exp(j (alpha y^2 - 2 pi beta y)) dy,

whose erf closed form is evaluated here through the Faddeeva function so that
no exponential ever overflows. Close to ``alpha = 0`` the erf form loses
digits to cancellation, so a Gauss-Legendre rule on the (then smooth)
integrand takes over; it contains the far-field sinc as its leading term.
"""

import functools

import numpy as np
import scipy.special

from ._validation import check_positive
from .exceptions import GeometryError
from .geometry import ArrayKind, LensVariant, SourcePoint, alpha_raw, beta
from .numerics import integrate_complex

__all__ = [
    "quadratic_phase_integral",
    "response_closed_form",
    "response_integral_oracle",
    "response_far_field_sinc",
    "response_vector",
    "response_matrix",
    "response_derivatives",
    "ula_response_vector",
]

# |alpha| (D/2)^2 below which the Gauss-Legendre branch is used.
SMALL_QUADRATIC_PHASE = 0.5
_C = np.exp(0.75j * np.pi)
_GL_BUDGET = 4_000_000  # complex entries per Gauss-Legendre chunk

_KEYS = {
    0: ("a",),
    1: ("a", "a_al", "a_be"),
    2: ("a", "a_al", "a_be", "a_alal", "a_albe", "a_bebe"),
}


def _erf_branch(al, be, D, order):
    sa = np.sqrt(al.astype(np.complex128))
    z1 = (al * D + 2 * np.pi * be) / (2 * sa)
    z2 = (al * D - 2 * np.pi * be) / (2 * sa)
    xi1, xi2 = _C * z1, _C * z2
    s1 = np.where(xi1.real >= 0, 1.0, -1.0)
    s2 = np.where(xi2.real >= 0, 1.0, -1.0)
    # erf(xi) = s - s erfc(s xi), erfc(x) = exp(-x^2) w(i x), exp(-xi^2) = exp(j z^2).
    # The exp(j z^2) factors are folded into the prefactor phase exactly.
    base = al * D**2 / 4 + 1.25 * np.pi
    R1 = np.exp(1j * (base + np.pi * be * D))
    R2 = np.exp(1j * (base - np.pi * be * D))
    P = np.exp(1j * (1.25 * np.pi - np.pi**2 * be**2 / al))
    w1 = scipy.special.wofz(1j * s1 * xi1)
    w2 = scipy.special.wofz(1j * s2 * xi2)
    Q = P * (s1 + s2) - s1 * R1 * w1 - s2 * R2 * w2
    A = np.sqrt(np.pi) / (2 * sa)
    out = {"a": A * Q}
    if order == 0:
        return out

    K = 2 * _C / np.sqrt(np.pi)
    ph_al = 1j * np.pi**2 * be**2 / al**2
    ph_be = -2j * np.pi**2 * be / al
    A_al = -A / (2 * al)
    z1_al, z2_al = z2 / (2 * al), z1 / (2 * al)
    z1_be = np.pi / sa
    z2_be = -z1_be
    Q_al = ph_al * Q + K * (R1 * z1_al + R2 * z2_al)
    Q_be = ph_be * Q + K * (R1 * z1_be + R2 * z2_be)
    out["a_al"] = A_al * Q + A * Q_al
    out["a_be"] = A * Q_be
    if order == 1:
        return out

    ph_alal = -2j * np.pi**2 * be**2 / al**3
    ph_albe = 2j * np.pi**2 * be / al**2
    ph_bebe = -2j * np.pi**2 / al
    A_alal = 3 * A / (4 * al**2)
    z1_alal = z1 / (4 * al**2) - z2 / (2 * al**2)
    z2_alal = z2 / (4 * al**2) - z1 / (2 * al**2)
    z1_albe = -np.pi / (2 * al * sa)
    z2_albe = -z1_albe

    def q2(ph_xy, ph_x, ph_y, Qy, pairs):
        acc = ph_xy * Q + ph_x * Qy
        for R, z, zx, zy, zxy in pairs:
            acc = acc + K * ((ph_y + 2j * z * zy) * R * zx + R * zxy)
        return acc

    Q_alal = q2(ph_alal, ph_al, ph_al, Q_al,
                [(R1, z1, z1_al, z1_al, z1_alal), (R2, z2, z2_al, z2_al, z2_alal)])
    Q_albe = q2(ph_albe, ph_al, ph_be, Q_be,
                [(R1, z1, z1_al, z1_be, z1_albe), (R2, z2, z2_al, z2_be, z2_albe)])
    Q_bebe = q2(ph_bebe, ph_be, ph_be, Q_be,
                [(R1, z1, z1_be, z1_be, 0.0), (R2, z2, z2_be, z2_be, 0.0)])
    out["a_alal"] = A_alal * Q + 2 * A_al * Q_al + A * Q_alal
    out["a_albe"] = A_al * Q_be + A * Q_albe
    out["a_bebe"] = A * Q_bebe
    return out


@functools.lru_cache(maxsize=32)
def _leggauss(n):
    return np.polynomial.legendre.leggauss(n)


def _gl_branch(al, be, D, order):
    h = D / 2
    gam = al * h**2
    om = np.pi * be * D
    # n nodes integrate degree 2n-1 exactly; exp(j om t) needs ~|om| + margin.
    n_nodes = 32 * (int(np.max(np.abs(om))) // 64 + 2)
    t, wt = _leggauss(n_nodes)
    out = {k: np.empty(al.shape, dtype=np.complex128) for k in _KEYS[order]}
    step = max(1, _GL_BUDGET // n_nodes)
    y = h * t
    # Integrand weights for each requested partial in (alpha, beta).
    factors = {
        "a": np.ones_like(y, dtype=np.complex128),
        "a_al": 1j * y**2,
        "a_be": -2j * np.pi * y,
        "a_alal": -(y**4) + 0j,
        "a_albe": 2 * np.pi * y**3 + 0j,
        "a_bebe": -4 * np.pi**2 * y**2 + 0j,
    }
    for i in range(0, al.size, step):
        sl = slice(i, i + step)
        e = np.exp(1j * (gam[sl, None] * t**2 - om[sl, None] * t)) * (h * wt)
        for k in out:
            out[k][sl] = e @ factors[k]
    return out


def quadratic_phase_integral(al, be, D, order=0):
    """Evaluate the aperture integral and its partials in (alpha, beta).

    Returns a dict with ``a`` and, for ``order >= 1``, ``a_al``, ``a_be``;
    ``order == 2`` adds ``a_alal``, ``a_albe``, ``a_bebe``. Arrays broadcast.
    """
    if order not in _KEYS:
        raise ValueError("order must be 0, 1 or 2")
    al, be = np.broadcast_arrays(np.asarray(al, dtype=float), np.asarray(be, dtype=float))
    shape = al.shape
    al, be = al.ravel(), be.ravel()
    small = np.abs(al) * (D / 2) ** 2 < SMALL_QUADRATIC_PHASE
    out = {k: np.empty(al.shape, dtype=np.complex128) for k in _KEYS[order]}
    if np.any(~small):
        part = _erf_branch(al[~small], be[~small], D, order)
        for k in out:
            out[k][~small] = part[k]
    if np.any(small):
        part = _gl_branch(al[small], be[small], D, order)
        for k in out:
            out[k][small] = part[k]
    return {k: v.reshape(shape) for k, v in out.items()}


def _scalarize(x):
    return x[()] if np.ndim(x) == 0 else x


def response_closed_form(design, sin_theta, source):
    """Closed-form (Fresnel-approximated) lens response at ``sin_theta``."""
    s = np.asarray(sin_theta, dtype=float)
    al = alpha_raw(design, s, source.d, source.phi)
    be = beta(s, source.phi, design.wavelength)
    return _scalarize(quadratic_phase_integral(al, be, design.aperture)["a"])


def response_integral_oracle(design, sin_theta, source, rel_tol=1e-10):
    """Lens response from the aperture integral with exact path lengths.

    The integrand carries the exact source-to-lens and lens-to-antenna
    distances, the exact lens phase profile and the 1/r amplitude terms; the
    normalisation removes the constant propagation factor so the result is
    directly comparable with :func:`response_closed_form`. Evaluated for a
    whole vector of ``sin_theta`` values with one shared subdivision.
    """
    if rel_tol < 1e-12:
        raise ValueError("rel_tol must be >= 1e-12")
    s = np.atleast_1d(np.asarray(sin_theta, dtype=float))
    if np.any(np.abs(s) > 1):
        raise GeometryError("|sin_theta| must not exceed 1")
    k0 = design.wavenumber
    F = design.focal_length
    d, phi = source.d, source.phi
    sphi = np.sin(phi)
    cos_t = np.sqrt(1 - s**2)[:, None]
    s_col = s[:, None]
    inv_f0 = design.inverse_f0

    def integrand(y):
        y = y[None, :]
        to_src = np.sqrt(d**2 + y**2 - 2 * d * y * sphi)
        # antenna b = (F cos(theta), -F sin(theta)); lens point p = (0, y)
        to_ant = np.sqrt((F * cos_t) ** 2 + (y + F * s_col) ** 2)
        to_focus = np.sqrt(F**2 + y**2)
        ex = (y**2 - 2 * d * y * sphi) / (to_src + d)
        ex = ex + 2 * y * F * s_col / (to_ant + to_focus)
        if design.variant is LensVariant.DESIGN2:
            F0 = 1.0 / inv_f0
            ex = ex - y**2 / (np.sqrt(F0**2 + y**2) + F0)
        return F * d / (to_src * to_ant) * np.exp(-1j * k0 * ex)

    cycles = design.electrical_aperture * (1 + np.max(np.abs(s)) + abs(sphi))
    val = integrate_complex(integrand, -design.aperture / 2, design.aperture / 2,
                            rel_tol=rel_tol, abs_tol=1e-14 * design.aperture,
                            initial_intervals=max(4, int(np.ceil(cycles))))
    return val[0] if np.ndim(sin_theta) == 0 else val


def response_far_field_sinc(D_y, sin_theta, phi, wavelength):
    """Plane-wave limit ``D_y sinc(D/lambda (sin(theta) - sin(phi)))``."""
    D_y = check_positive(D_y, "D_y")
    De = D_y / check_positive(wavelength, "wavelength")
    s = np.asarray(sin_theta, dtype=float)
    return _scalarize(D_y * np.sinc(De * s - De * np.sin(phi)))


def _require_lens(geom):
    if geom.kind is not ArrayKind.LENS_FOCAL_ARC:
        raise GeometryError("a lens focal-arc geometry is required")


def response_vector(design, geom, source):
    """Length-N_a lens response, element n sampled at ``sin(theta_n) = n/N``."""
    _require_lens(geom)
    if geom.n_antennas != design.n_antennas:
        raise GeometryError("geometry antenna count does not match the lens aperture")
    return np.asarray(response_closed_form(design, geom.sin_theta, source))


def response_matrix(design, geom, d, phi):
    """Responses for many sources at once: shape ``(len(d), N_a)``.

    ``d`` and ``phi`` are paired 1-D arrays (a flattened search grid).
    """
    _require_lens(geom)
    d = np.atleast_1d(np.asarray(d, dtype=float))[:, None]
    phi = np.atleast_1d(np.asarray(phi, dtype=float))[:, None]
    s = geom.sin_theta[None, :]
    al = alpha_raw(design, s, d, phi)
    be = beta(s, phi, design.wavelength)
    return quadratic_phase_integral(al, be, design.aperture)["a"]


def response_derivatives(design, geom, d, phi, order=1):
    """Response and its partials with respect to (d, phi).

    ``d`` and ``phi`` may be scalars or paired 1-D arrays; outputs then have
    shape ``(N_a,)`` or ``(len(d), N_a)``. Keys: ``a``, then for ``order>=1``
    ``a_d``, ``a_phi`` and
    for ``order=2`` also ``a_dd``, ``a_dphi``, ``a_phiphi``.
    """
    _require_lens(geom)
    if order not in (0, 1, 2):
        raise ValueError("order must be 0, 1 or 2")
    scalar = np.ndim(d) == 0 and np.ndim(phi) == 0
    d = np.atleast_1d(np.asarray(d, dtype=float))[:, None]
    phi = np.atleast_1d(np.asarray(phi, dtype=float))[:, None]
    lam = design.wavelength
    s = geom.sin_theta[None, :]
    al = alpha_raw(design, s, d, phi)
    be = beta(s, phi, lam)
    q = quadratic_phase_integral(al, be, design.aperture, order=order)

    c2 = np.cos(phi) ** 2
    al_d = np.pi * c2 / (lam * d**2)
    al_p = np.pi * np.sin(2 * phi) / (lam * d)
    be_p = -np.cos(phi) / lam
    out = {"a": q["a"]}
    if order == 0:
        return {"a": out["a"][0]} if scalar else out
    out = {
        "a": q["a"],
        "a_d": q["a_al"] * al_d,
        "a_phi": q["a_al"] * al_p + q["a_be"] * be_p,
    }
    if order == 2:
        al_dd = -2 * np.pi * c2 / (lam * d**3)
        al_dp = -np.pi * np.sin(2 * phi) / (lam * d**2)
        al_pp = 2 * np.pi * np.cos(2 * phi) / (lam * d)
        be_pp = np.sin(phi) / lam
        out["a_dd"] = q["a_alal"] * al_d**2 + q["a_al"] * al_dd
        out["a_dphi"] = (q["a_alal"] * al_d * al_p + q["a_albe"] * al_d * be_p
                         + q["a_al"] * al_dp)
        out["a_phiphi"] = (q["a_alal"] * al_p**2 + 2 * q["a_albe"] * al_p * be_p
                           + q["a_bebe"] * be_p**2 + q["a_al"] * al_pp
                           + q["a_be"] * be_pp)
    if scalar:
        out = {k: v[0] for k, v in out.items()}
    return out


def ula_response_vector(geom, source):
    """Spherical-wave ULA response ``(d/d_n) exp(-j k0 (d_n - d))``."""
    if geom.kind is not ArrayKind.ULA_HALF_WAVELENGTH:
        raise GeometryError("a half-wavelength ULA geometry is required")
    if not isinstance(source, SourcePoint):
        source = SourcePoint(*source)
    k0 = 2 * np.pi / geom.wavelength
    d = source.d
    y = geom.indices * geom.spacing
    extra = y**2 - 2 * d * y * np.sin(source.phi)
    d_n = np.sqrt(d**2 + extra)
    # d_n - d without cancellation
    return d / d_n * np.exp(-1j * k0 * extra / (d_n + d))
