"""Fisher information, Cramer-Rao bounds and the position error bound.

Each path contributes the real parameters ``(|g|, arg g, d, phi)``. The
4L x 4L real FIM is built from these, and the reported 3L x 3L matrix over
``(|g|, d, phi)`` is its Schur complement with the gain phases eliminated as
nuisance parameters, so inverting it gives exactly the same bounds as the
full matrix.
"""

from dataclasses import dataclass

import numpy as np

from ._validation import check_mask
from .channel import PathParams
from .exceptions import SingularMatrixError
from .geometry import SourcePoint
from .numerics import invert_hermitian
from .response import response_closed_form, response_derivatives, response_integral_oracle

__all__ = [
    "FisherResult",
    "response_grad",
    "response_grad_oracle",
    "response_grad_fd",
    "fim",
    "fim_full",
    "crlb_components",
    "peb",
    "fisher_analysis",
]


@dataclass(frozen=True)
class FisherResult:
    fim: np.ndarray        # 3L x 3L over (|g_l|, d_l, phi_l)
    fim_full: np.ndarray   # 4L x 4L over (|g_l|, arg g_l, d_l, phi_l)
    crlb_d: float
    crlb_phi: float
    peb: float


def response_grad(design, geom, source):
    """Analytic ``(da/dd, da/dphi)`` of the lens response vector."""
    out = response_derivatives(design, geom, source.d, source.phi, order=1)
    return out["a_d"], out["a_phi"]


def _richardson(f, x, h):
    # Central differences at h and h/2 combined to cancel the h^2 term.
    c1 = (f(x + h) - f(x - h)) / (2 * h)
    c2 = (f(x + h / 2) - f(x - h / 2)) / h
    return (4 * c2 - c1) / 3


def response_grad_oracle(design, geom, source, rel_step_d=1e-4, step_phi=1e-6,
                         rel_tol=1e-11):
    """``(a, da/dd, da/dphi)`` by Richardson-extrapolated differences of the
    exact-distance integral response."""
    s = geom.sin_theta

    def at(d, phi):
        return response_integral_oracle(design, s, SourcePoint(d, phi), rel_tol=rel_tol)

    a = at(source.d, source.phi)
    a_d = _richardson(lambda x: at(x, source.phi), source.d, rel_step_d * source.d)
    a_phi = _richardson(lambda x: at(source.d, x), source.phi, step_phi)
    return a, a_d, a_phi


def response_grad_fd(design, geom, source, rel_step_d=1e-4, step_phi=1e-6):
    """``(da/dd, da/dphi)`` by Richardson differences of the closed form; an
    independent check on :func:`response_grad`."""
    s = geom.sin_theta

    def at(d, phi):
        return response_closed_form(design, s, SourcePoint(d, phi))

    a_d = _richardson(lambda x: at(x, source.phi), source.d, rel_step_d * source.d)
    a_phi = _richardson(lambda x: at(source.d, x), source.phi, step_phi)
    return a_d, a_phi


def _jacobian(design, geom, paths, gradients):
    cols = []
    for p in paths:
        if gradients == "analytic":
            r = response_derivatives(design, geom, p.d, p.phi, order=1)
            a, a_d, a_phi = r["a"], r["a_d"], r["a_phi"]
        elif gradients == "oracle":
            a, a_d, a_phi = response_grad_oracle(design, geom, p.source)
        else:
            raise ValueError("gradients must be 'analytic' or 'oracle'")
        mag = abs(p.g)
        unit = p.g / mag if mag > 0 else 1.0
        cols += [unit * a, 1j * p.g * a, p.g * a_d, p.g * a_phi]
    return np.stack(cols, axis=1)


def fim_full(design, geom, paths, noise_var, mask=None, gradients="analytic"):
    """4L x 4L real FIM ``(2/sigma^2) Re{J^H J}`` over (|g|, arg g, d, phi) per path."""
    paths = [p if isinstance(p, PathParams) else PathParams(*p) for p in paths]
    if not noise_var > 0:
        raise ValueError("noise_var must be positive")
    J = _jacobian(design, geom, paths, gradients)
    J = J[check_mask(mask, geom.n_antennas)]
    F = (2.0 / noise_var) * np.real(J.conj().T @ J)
    return 0.5 * (F + F.T)


def _split(n_paths):
    keep = np.array([[4 * l, 4 * l + 2, 4 * l + 3] for l in range(n_paths)]).ravel()
    drop = np.array([4 * l + 1 for l in range(n_paths)])
    return keep, drop


def fim(design, geom, paths, noise_var, mask=None, gradients="analytic"):
    """3L x 3L FIM over (|g_l|, d_l, phi_l), gain phases eliminated."""
    return _reduce(fim_full(design, geom, paths, noise_var, mask, gradients))


def _reduce(F):
    keep, drop = _split(F.shape[0] // 4)
    Fkk = F[np.ix_(keep, keep)]
    Fkd = F[np.ix_(keep, drop)]
    Fdd = F[np.ix_(drop, drop)]
    try:
        red = Fkk - Fkd @ np.linalg.solve(Fdd, Fkd.T)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError("gain-phase block is singular (zero path gain?)") from exc
    return 0.5 * (red + red.T)


def _polar_jacobian(paths):
    # rows: (|g|, d, phi); columns: (|g|, x, y) with x = -d cos(phi), y = d sin(phi)
    blocks = []
    for p in paths:
        x, y, d = -p.d * np.cos(p.phi), p.d * np.sin(p.phi), p.d
        blocks.append(np.array([[1, 0, 0],
                                [0, x / d, y / d],
                                [0, y / d**2, -x / d**2]]))
    n = 3 * len(blocks)
    T = np.zeros((n, n))
    for l, b in enumerate(blocks):
        T[3 * l:3 * l + 3, 3 * l:3 * l + 3] = b
    return T


def _bounds(F3, paths):
    inv = invert_hermitian(F3)
    L = len(paths)
    crlb_d = np.sqrt(sum(inv[3 * l + 1, 3 * l + 1] for l in range(L)))
    crlb_phi = np.sqrt(sum(inv[3 * l + 2, 3 * l + 2] for l in range(L)))
    T = _polar_jacobian(paths)
    inv_u = invert_hermitian(T.T @ F3 @ T)
    pos = [i for l in range(L) for i in (3 * l + 1, 3 * l + 2)]
    return float(crlb_d), float(crlb_phi), float(np.sqrt(np.trace(inv_u[np.ix_(pos, pos)])))


def crlb_components(design, geom, paths, noise_var, mask=None, gradients="analytic"):
    """``(CRLB(d), CRLB(phi))``: root of the summed inverse-FIM diagonal over paths."""
    paths = [p if isinstance(p, PathParams) else PathParams(*p) for p in paths]
    F3 = fim(design, geom, paths, noise_var, mask, gradients)
    return _bounds(F3, paths)[:2]


def peb(design, geom, paths, noise_var, mask=None, gradients="analytic"):
    """Position error bound (m) over all path positions."""
    paths = [p if isinstance(p, PathParams) else PathParams(*p) for p in paths]
    F3 = fim(design, geom, paths, noise_var, mask, gradients)
    return _bounds(F3, paths)[2]


def fisher_analysis(design, geom, paths, noise_var, mask=None, gradients="analytic"):
    paths = [p if isinstance(p, PathParams) else PathParams(*p) for p in paths]
    F4 = fim_full(design, geom, paths, noise_var, mask, gradients)
    F3 = _reduce(F4)
    crlb_d, crlb_phi, pe = _bounds(F3, paths)
    return FisherResult(F3, F4, crlb_d, crlb_phi, pe)
