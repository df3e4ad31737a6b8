"""Uplink multi-user evaluation: antenna selection, power control,
MRC/MMSE combining, sum rate, and an approximate Gram-Schmidt analog
combiner for the ULA benchmark."""

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_complex_matrix, check_count
from .channel import UserChannel
from .exceptions import GeometryError, SingularMatrixError

__all__ = [
    "SelectionMatrix",
    "select_antennas_power",
    "PowerAntennaSelector",
    "power_control_inversion",
    "mrc_combiner",
    "mmse_combiner",
    "combiner_set",
    "user_rate",
    "sum_rate",
    "gs_analog_combiner",
    "whiten_effective",
]


def _channel_matrix(channels):
    """Stack user channels as columns: shape ``(N_a, K)``."""
    cols = [c.h if isinstance(c, UserChannel) else np.asarray(c) for c in channels]
    if not cols:
        raise ValueError("at least one user channel is required")
    return np.stack(cols, axis=1).astype(np.complex128)


@dataclass(frozen=True)
class SelectionMatrix:
    n_antennas: int
    indices: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=int)
        if idx.size >= self.n_antennas or idx.size < 1:
            raise GeometryError("need 1 <= M_RF < N_a selected antennas")
        if np.unique(idx).size != idx.size:
            raise GeometryError("selected antennas must be distinct")
        object.__setattr__(self, "indices", np.sort(idx))

    @property
    def m_rf(self):
        return self.indices.size

    @property
    def mask(self):
        out = np.zeros(self.n_antennas, dtype=bool)
        out[self.indices] = True
        return out

    def as_matrix(self):
        """Binary ``N_a x M_RF`` matrix with one unit entry per column."""
        W = np.zeros((self.n_antennas, self.m_rf))
        W[self.indices, np.arange(self.m_rf)] = 1.0
        return W

    def apply(self, H):
        return np.asarray(H)[self.indices]


def power_control_inversion(channels, target=1.0):
    """Channel-inversion powers ``p_k = target / ||h_k||^2``."""
    H = _channel_matrix(channels)
    energy = np.sum(np.abs(H) ** 2, axis=0)
    if np.any(energy == 0):
        raise GeometryError("channel inversion needs nonzero channels")
    return target / energy


def select_antennas_power(channels, m_rf, powers=None):
    """Pick the ``m_rf`` antennas with largest ``sum_k p_k |h_kn|^2``.

    ``powers`` defaults to channel inversion. Ties go to the lower index.
    """
    H = _channel_matrix(channels)
    m_rf = check_count(m_rf, "m_rf")
    if m_rf >= H.shape[0]:
        raise GeometryError("M_RF must be smaller than the antenna count")
    p = power_control_inversion(channels) if powers is None else np.asarray(powers, float)
    score = np.abs(H) ** 2 @ p
    order = np.lexsort((np.arange(score.size), -score))
    return SelectionMatrix(H.shape[0], order[:m_rf])


class PowerAntennaSelector(BaseEstimator, TransformerMixin):
    """Power-based antenna selection as a scikit-learn transformer.

    ``fit(H)`` takes the ``(K, N_a)`` user channels as rows and learns the
    selected antenna set; ``transform(X)`` keeps those columns.
    """

    def __init__(self, m_rf=25):
        self.m_rf = m_rf

    def fit(self, H, y=None):
        H = check_complex_matrix(H, name="H")
        self.selection_ = select_antennas_power(list(H), self.m_rf)
        self.support_ = self.selection_.mask
        self.n_features_in_ = H.shape[1]
        return self

    def transform(self, X):
        X = check_complex_matrix(X, self.n_features_in_, name="X")
        return X[:, self.selection_.indices]


def mrc_combiner(h_s):
    h_s = np.asarray(h_s, dtype=np.complex128)
    norm = np.linalg.norm(h_s)
    if norm == 0:
        raise GeometryError("MRC needs a nonzero channel")
    return h_s / norm


def mmse_combiner(H_s, powers, noise_var, k):
    """``R_rr^{-1} sqrt(p_k) h_k`` normalised, with ``R_rr = H P H^H + sigma^2 I``."""
    H_s = np.asarray(H_s, dtype=np.complex128)
    powers = np.asarray(powers, dtype=float)
    if not noise_var > 0:
        raise ValueError("noise_var must be positive")
    R = (H_s * powers) @ H_s.conj().T + noise_var * np.eye(H_s.shape[0])
    try:
        factor = scipy.linalg.cho_factor(R, lower=True)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError("autocorrelation matrix is not positive definite") from exc
    u = scipy.linalg.cho_solve(factor, np.sqrt(powers[k]) * H_s[:, k])
    norm = np.linalg.norm(u)
    if norm == 0:
        return mrc_combiner(H_s[:, k]) if np.any(H_s[:, k]) else u
    return u / norm


def combiner_set(H_s, powers, noise_var, kind):
    """Unit-norm combiners for every user as columns of an ``M x K`` matrix."""
    H_s = np.asarray(H_s, dtype=np.complex128)
    K = H_s.shape[1]
    if kind == "mrc":
        cols = [mrc_combiner(H_s[:, k]) for k in range(K)]
    elif kind == "mmse":
        cols = [mmse_combiner(H_s, powers, noise_var, k) for k in range(K)]
    else:
        raise ValueError("kind must be 'mrc' or 'mmse'")
    return np.stack(cols, axis=1)


def user_rate(k, U, H_s, powers, noise_var):
    """Achievable rate (bit/s/Hz) of user ``k`` under combiners ``U``.

    The noise term is ``sigma^2 ||u_k||^2``, which is ``sigma^2`` for the
    unit-norm combiners used throughout.
    """
    U = np.asarray(U)
    H_s = np.asarray(H_s)
    powers = np.asarray(powers, dtype=float)
    gains = np.abs(U[:, k].conj() @ H_s) ** 2 * powers
    interference = gains.sum() - gains[k]
    noise = noise_var * np.vdot(U[:, k], U[:, k]).real
    return float(np.log2(1 + gains[k] / (interference + noise)))


def sum_rate(U, H_s, powers, noise_var):
    return float(sum(user_rate(k, U, H_s, powers, noise_var) for k in range(H_s.shape[1])))


def _quantize_phase(W, bits):
    step = 2 * np.pi / 2**bits
    ph = np.round(np.angle(W) / step) * step
    return np.exp(1j * ph) / np.sqrt(W.shape[0])


def gs_analog_combiner(channels, m_rf, codebook_size=1024, phase_bits=10,
                       return_details=False):
    """Approximate Gram-Schmidt analog combiner for a half-wavelength ULA.

    The codebook holds far-field steering vectors on a uniform sin(theta)
    grid in [-1, 1). Codewords are picked greedily by the channel energy they
    capture from the part of the channel space not yet covered, with
    Gram-Schmidt deflation after each pick. The orthonormal basis is then
    mapped to a constant-modulus matrix with ``phase_bits`` phase resolution.
    This is a simplified stand-in for the published hybrid design.
    """
    H = _channel_matrix(channels)
    N = H.shape[0]
    m_rf = check_count(m_rf, "m_rf")
    if m_rf > N:
        raise GeometryError("M_RF cannot exceed the antenna count")
    n = np.arange(N) - (N - 1) / 2
    grid = -1 + 2 * np.arange(codebook_size) / codebook_size
    C = np.exp(1j * np.pi * np.outer(n, grid)) / np.sqrt(N)
    # Projector-free deflation: keep the codebook and channels orthogonal to the basis.
    C_res = C.copy()
    H_res = H.copy()
    basis, picks = [], []
    for _ in range(m_rf):
        score = np.sum(np.abs(C_res.conj().T @ H_res) ** 2, axis=1)
        norms = np.sum(np.abs(C_res) ** 2, axis=0)
        score = np.where(norms > 1e-12, score / np.maximum(norms, 1e-300), -1.0)
        score[picks] = -1.0
        j = int(np.argmax(score))
        q = C_res[:, j] / np.linalg.norm(C_res[:, j])
        basis.append(q)
        picks.append(j)
        C_res = C_res - np.outer(q, q.conj() @ C_res)
        H_res = H_res - np.outer(q, q.conj() @ H_res)
    B = np.stack(basis, axis=1)
    W = _quantize_phase(B, phase_bits)
    if return_details:
        return W, B, np.array(picks)
    return W


def whiten_effective(W, H):
    """Effective channels ``(W^H W)^{-1/2} W^H H`` seen after analog combining,
    so that white noise stays white in the reduced space."""
    W = np.asarray(W)
    G = W.conj().T @ W
    vals, vecs = np.linalg.eigh(G)
    if vals[0] <= 1e-12 * vals[-1]:
        raise SingularMatrixError("analog combiner has dependent columns")
    inv_sqrt = (vecs / np.sqrt(vals)) @ vecs.conj().T
    return inv_sqrt @ (W.conj().T @ np.asarray(H))
