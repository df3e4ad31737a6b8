"""Numeric kernels: complex error function, adaptive quadrature, small dense
linear algebra and seeded complex Gaussian sampling.
"""

import numpy as np
import scipy.linalg
import scipy.special

from .exceptions import NumericalError, QuadratureError, SingularMatrixError

__all__ = [
    "erf_complex",
    "faddeeva",
    "integrate_complex",
    "solve_least_squares",
    "invert_hermitian",
    "make_rng",
    "spawn_seeds",
    "sample_complex_gaussian",
]

ERF_MAX_ABS = 1e4


def erf_complex(z):
    """Error function of a complex argument (array-aware).

    Backed by the Faddeeva-function implementation in :mod:`scipy.special`,
    which is accurate to a few ulps over the whole plane including the
    diagonals ``arg z = +-pi/4, +-3pi/4`` where the lens response lives.
    """
    z = np.asarray(z, dtype=np.complex128)
    if np.any(np.abs(z) > ERF_MAX_ABS):
        raise NumericalError(f"erf argument exceeds |z| <= {ERF_MAX_ABS:g}")
    with np.errstate(over="ignore", invalid="ignore"):
        out = scipy.special.erf(z)
    if not np.all(np.isfinite(out)):
        raise NumericalError("erf overflowed: exp(-z**2) is not representable")
    return out[()] if out.ndim == 0 else out


def faddeeva(z):
    """Scaled complementary error function ``w(z) = exp(-z**2) erfc(-i z)``."""
    return scipy.special.wofz(np.asarray(z, dtype=np.complex128))


# Gauss-Kronrod 7/15 pair (QUADPACK qk15).
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_KRONROD_W = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GAUSS_W = np.zeros(15)
# Gauss nodes are the odd-indexed Kronrod nodes (1, 3, 5, 7 from the edge).
_GAUSS_W[[1, 3, 5]] = _WG[:3]
_GAUSS_W[[9, 11, 13]] = _WG[2::-1]
_GAUSS_W[7] = _WG[3]


def integrate_complex(f, a, b, rel_tol=1e-10, abs_tol=1e-14, initial_intervals=1,
                      max_intervals=200_000):
    """Adaptive Gauss-Kronrod (7/15) integral of a complex function on [a, b].

    ``f`` is called with a 1-D array of abscissae and must return values of
    shape ``(..., len(t))``; leading axes are integrated jointly so a whole
    batch of integrands shares one subdivision. Every interval whose
    Kronrod/Gauss disagreement exceeds its share of the tolerance is bisected
    until the summed error estimate is below ``max(rel_tol*|I|, abs_tol)`` for
    every component.

    ``initial_intervals`` seeds a uniform pre-split, which should be set to
    roughly the number of oscillation periods for highly oscillatory
    integrands.
    """
    a = float(a)
    b = float(b)
    if not a < b:
        raise ValueError("integrate_complex requires a < b")
    if rel_tol < 1e-14:
        raise ValueError("rel_tol must be >= 1e-14")
    edges = np.linspace(a, b, int(initial_intervals) + 1)
    lo, hi = edges[:-1], edges[1:]
    total = None
    total_err = None
    while True:
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        t = (mid[:, None] + half[:, None] * _NODES[None, :]).ravel()
        vals = np.asarray(f(t), dtype=np.complex128)
        batch_shape = vals.shape[:-1]
        vals = vals.reshape(batch_shape + (lo.size, 15))
        if not np.all(np.isfinite(vals)):
            raise QuadratureError("integrand is not finite on the interval")
        kron = (vals @ _KRONROD_W) * half
        gauss = (vals @ _GAUSS_W) * half
        err = np.abs(kron - gauss)
        if total is None:
            total = np.zeros(batch_shape, dtype=np.complex128)
            total_err = np.zeros(batch_shape)
        estimate = total + kron.sum(axis=-1)
        estimate_err = total_err + err.sum(axis=-1)
        tol = np.maximum(rel_tol * np.abs(estimate), abs_tol)
        if np.all(estimate_err <= tol):
            return estimate[()] if estimate.ndim == 0 else estimate
        # An interval is kept when its error fits its length share of the tolerance.
        share = (hi - lo) / (b - a)
        ok = np.all(err <= tol[..., None] * share, axis=tuple(range(err.ndim - 1)))
        if ok.all():
            # Errors are spread evenly; split the worst offenders regardless.
            worst = np.max(err / np.maximum(tol[..., None], 1e-300),
                           axis=tuple(range(err.ndim - 1)))
            ok = worst < np.median(worst)
        total = total + kron[..., ok].sum(axis=-1)
        total_err = total_err + err[..., ok].sum(axis=-1)
        lo, hi = lo[~ok], hi[~ok]
        if 2 * lo.size > max_intervals or np.any(hi - lo < 1e-15 * (b - a)):
            raise QuadratureError(
                f"no convergence after subdivision (error {np.max(estimate_err):.3e})")
        mid = 0.5 * (lo + hi)
        lo, hi = np.concatenate([lo, mid]), np.concatenate([mid, hi])


def solve_least_squares(A, b, max_cond=1e12):
    """Least-squares solution ``(A^H A)^{-1} A^H b`` with a rank guard."""
    A = np.atleast_2d(np.asarray(A))
    b = np.asarray(b)
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > max_cond:
        raise SingularMatrixError(f"least-squares matrix is rank deficient (cond={cond:.3g})")
    x, *_ = np.linalg.lstsq(A, b, rcond=None)
    return x


def invert_hermitian(M, rel_eig_floor=1e-14):
    """Inverse of a Hermitian positive-definite matrix via Cholesky.

    Raises ``SingularMatrixError`` when the smallest eigenvalue is at or below
    ``rel_eig_floor`` times the largest.
    """
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("invert_hermitian expects a square matrix")
    M = 0.5 * (M + M.conj().T)
    eig = np.linalg.eigvalsh(M)
    if eig[-1] <= 0 or eig[0] <= rel_eig_floor * eig[-1]:
        raise SingularMatrixError(
            f"matrix is singular or indefinite (eigenvalues {eig[0]:.3g} .. {eig[-1]:.3g})")
    factor = scipy.linalg.cho_factor(M, lower=True)
    inv = scipy.linalg.cho_solve(factor, np.eye(M.shape[0], dtype=M.dtype))
    return 0.5 * (inv + inv.conj().T)


def make_rng(seed):
    """Counter-based (Philox) generator; passes an existing Generator through."""
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.Philox(seed))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def spawn_seeds(master_seed, n):
    """Deterministic independent child seed sequences for ``n`` workers/trials."""
    return np.random.SeedSequence(master_seed).spawn(n)


def sample_complex_gaussian(n, variance, seed):
    """``n`` i.i.d. circularly-symmetric CN(0, variance) samples."""
    if not variance > 0:
        raise ValueError("variance must be positive")
    rng = make_rng(seed)
    scale = np.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
