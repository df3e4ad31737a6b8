"""Three-stage location/gain estimator: energy-window initialisation, grid
OMP detection and Newton refinement with cyclic re-refinement."""

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_complex_matrix, check_complex_vector, check_count, check_mask
from .channel import PathParams, build_channel
from .exceptions import FarFieldDegenerateError, FarFieldWarning, GeometryError, NoWindowFoundError
from .geometry import ArrayKind, LensDesign, ArrayGeometry, SourcePoint, rayleigh_distance
from .numerics import solve_least_squares
from .response import response_derivatives, response_matrix

__all__ = [
    "EstimatorConfig",
    "EstimationResult",
    "SearchGrid",
    "detect_windows",
    "locate_edges",
    "init_coarse",
    "coarse_candidates",
    "build_search_grid",
    "domp_step",
    "newton_refine",
    "estimate_paths",
    "ExLensLocalizer",
]

_PHI_LIMIT = np.pi / 2 - 1e-6


@dataclass(frozen=True)
class EstimatorConfig:
    """Estimator settings.

    ``delta_d=None`` means a half-width of ``rel_delta_d * d_hat`` around each
    coarse distance. ``d_max=None`` uses 10 Rayleigh distances.

    ``coarse_distance`` picks where the distance search interval comes from:
    ``"window"`` uses the window width, ``"log-grid"`` a log-spaced grid from
    the radiating near-field boundary to ``d_max``, and ``"auto"`` switches to the log grid
    when an antenna-selection mask truncates the windows.
    """

    L: int = 1
    delta_d: Optional[float] = None
    rel_delta_d: float = 0.3
    delta_phi: float = 0.05
    N_d: int = 32
    N_phi: int = 32
    newton_iters: int = 5
    cyclic_rounds: int = 3
    window_threshold_db: float = -10.0
    min_window_antennas: int = 2
    selection_mask: Optional[np.ndarray] = None
    noise_var: Optional[float] = None
    d_max: Optional[float] = None
    refine: bool = True
    coarse_distance: str = "auto"

    def __post_init__(self):
        check_count(self.L, "L")
        check_count(self.N_d, "N_d", 2)
        check_count(self.N_phi, "N_phi", 2)
        check_count(self.newton_iters, "newton_iters", 0)
        check_count(self.cyclic_rounds, "cyclic_rounds", 0)
        if self.delta_d is not None and not self.delta_d > 0:
            raise ValueError("delta_d must be positive")
        if not self.rel_delta_d > 0 or not self.delta_phi > 0:
            raise ValueError("search half-widths must be positive")
        if not self.window_threshold_db < 0:
            raise ValueError("window_threshold_db must be negative")
        if self.noise_var is not None and not self.noise_var > 0:
            raise ValueError("noise_var must be positive")
        if self.coarse_distance not in ("auto", "window", "log-grid"):
            raise ValueError("coarse_distance must be 'auto', 'window' or 'log-grid'")


@dataclass
class EstimationResult:
    paths: list
    h: np.ndarray
    residual_power_history: list
    angle_only: list = field(default_factory=list)
    # Grid-stage detections (before any Newton step), gains re-fitted jointly.
    grid_paths: list = field(default_factory=list)

    @property
    def n_paths(self):
        return len(self.paths)


@dataclass(frozen=True)
class SearchGrid:
    d: np.ndarray
    phi: np.ndarray
    angle_only: bool = False

    @property
    def points(self):
        dd, pp = np.meshgrid(self.d, self.phi, indexing="ij")
        return dd.ravel(), pp.ravel()


# ---------------------------------------------------------------- stage 1

def detect_windows(r, geom, threshold_db=-10.0, min_antennas=2, mask=None):
    """Energy windows as ``(v_lo, v_hi)`` sin(theta) intervals, strongest first.

    Antennas whose power is within ``threshold_db`` of the peak are grouped
    into contiguous runs; runs shorter than ``min_antennas`` are dropped.
    """
    if geom.kind is not ArrayKind.LENS_FOCAL_ARC:
        raise GeometryError("window detection needs a lens geometry")
    r = check_complex_vector(r, geom.n_antennas)
    power = np.abs(r) ** 2
    if mask is not None:
        power = np.where(check_mask(mask, geom.n_antennas), power, 0.0)
    peak = power.max()
    if peak == 0:
        raise NoWindowFoundError("received signal has no power")
    above = power >= peak * 10 ** (threshold_db / 10)
    edges = np.flatnonzero(np.diff(np.concatenate([[0], above.astype(int), [0]])))
    runs = [(a, b - 1) for a, b in zip(edges[::2], edges[1::2]) if b - a >= min_antennas]
    if not runs:
        raise NoWindowFoundError("no window spans the minimum number of antennas")
    runs.sort(key=lambda ab: -power[ab[0]:ab[1] + 1].sum())
    s = geom.sin_theta
    return [(float(s[a]), float(s[b])) for a, b in runs]


def locate_edges(r, geom, window, level=0.5):
    """Sub-antenna edge positions of a detected window.

    The erf zero points sit where the response amplitude has dropped to half
    of the flat top, so each edge is the ``level * peak`` amplitude crossing,
    found by walking out from the window peak and interpolating linearly.
    """
    r = check_complex_vector(r, geom.n_antennas)
    amp = np.abs(r)
    N = geom.half_size
    lo = int(round(window[0] * N)) + N
    hi = int(round(window[1] * N)) + N
    k = lo + int(np.argmax(amp[lo:hi + 1]))
    target = level * amp[k]

    def walk(step):
        i = k
        while 0 <= i + step < amp.size and amp[i + step] >= target:
            i += step
        j = i + step
        if not 0 <= j < amp.size:
            return float(i)
        frac = (amp[i] - target) / (amp[i] - amp[j])
        return i + step * frac

    return (walk(-1) - N) / N, (walk(+1) - N) / N


def _default_d_max(design):
    return 10 * rayleigh_distance(design.aperture, design.wavelength)


def init_coarse(v1, v2, design, d_max=None):
    """Coarse ``SourcePoint`` from the two erf zero points.

    ``v1`` is the root of the first erf term and ``v2`` of the second. The
    2x2 least-squares system in ``(sin(phi), cos^2(phi)/d)`` is solved
    directly. A non-positive curvature term means the source is effectively
    in the far field: the distance is then capped at ``d_max`` with a
    ``FarFieldWarning``, or ``FarFieldDegenerateError`` is raised if no cap is
    given.
    """
    for v in (v1, v2):
        if not -1 < v < 1:
            raise GeometryError("window edges must lie in (-1, 1)")
    F, D = design.focal_length, design.aperture
    r = F / D
    c = F * design.inverse_f0
    g = np.array([(v1 + r) ** 2 - r**2 + c, (v2 - r) ** 2 - r**2 + c])
    G = np.array([[2 * r, F], [-2 * r, F]])
    q1, q2 = solve_least_squares(G, g)
    q1 = float(np.clip(q1, -np.sin(_PHI_LIMIT), np.sin(_PHI_LIMIT)))
    phi = float(np.arcsin(q1))
    if q2 <= 0 or (d_max is not None and (1 - q1**2) / q2 > d_max):
        if d_max is None:
            raise FarFieldDegenerateError("window implies a source at infinity")
        warnings.warn(f"coarse distance capped at d_max={d_max:g} m", FarFieldWarning,
                      stacklevel=2)
        return SourcePoint(d_max, phi)
    return SourcePoint((1 - q1**2) / q2, phi)


def coarse_candidates(v_lo, v_hi, design, d_max):
    """Coarse sources consistent with a window ``[v_lo, v_hi]``.

    The window only fixes ``|1/F0 - cos^2(phi)/d|``, so which edge belongs to
    which erf term depends on the side of F0 the source lies on. Design 1
    has a single ordering; for Design 2 both orderings that give a positive
    distance are returned. Each item is ``(SourcePoint, capped)``.
    """
    orders = [(v_hi, v_lo)] if design.variant.value == "design1" else [(v_lo, v_hi), (v_hi, v_lo)]
    out = []
    for a, b in orders:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            src = init_coarse(a, b, design, d_max=d_max)
        capped = any(issubclass(w.category, FarFieldWarning) for w in caught)
        out.append((src, capped))
    if all(c for _, c in out):
        out = out[:1]
    else:
        out = [item for item in out if not item[1]]
    return out


# ---------------------------------------------------------------- stage 2

def build_search_grid(coarse, cfg, angle_only=False):
    """Union of the per-source intervals ``d +- delta_d`` and ``phi +- delta_phi``."""
    coarse = list(coarse)
    if not coarse:
        raise ValueError("at least one coarse source is required")
    ds, ps = [], []
    for src in coarse:
        if angle_only:
            ds.append(np.array([src.d]))
        else:
            half = cfg.delta_d if cfg.delta_d is not None else cfg.rel_delta_d * src.d
            lo = max(src.d - half, 1e-3 * src.d)
            ds.append(np.linspace(lo, src.d + half, cfg.N_d))
        ps.append(np.linspace(max(src.phi - cfg.delta_phi, -_PHI_LIMIT),
                              min(src.phi + cfg.delta_phi, _PHI_LIMIT), cfg.N_phi))
    return SearchGrid(_merge(np.concatenate(ds)), _merge(np.concatenate(ps)), angle_only)


def _log_distance_grid(windows, design, cfg, d_max):
    """Grid for truncated windows: angles around each window centre, distances
    log-spaced from the radiating near-field boundary ``0.62 sqrt(D^3/lambda)``
    (below it the quadratic-phase model does not hold) to ``d_max``, since the
    width no longer encodes d."""
    d_min = 0.62 * np.sqrt(design.aperture**3 / design.wavelength)
    ds = np.geomspace(min(d_min, 0.5 * d_max), d_max, cfg.N_d)
    ps = []
    for lo, hi in windows:
        c = np.arcsin(np.clip(0.5 * (lo + hi), -np.sin(_PHI_LIMIT), np.sin(_PHI_LIMIT)))
        half = max(cfg.delta_phi, 0.5 * (np.arcsin(np.clip(hi, -1, 1))
                                         - np.arcsin(np.clip(lo, -1, 1))))
        ps.append(np.linspace(max(c - half, -_PHI_LIMIT), min(c + half, _PHI_LIMIT), cfg.N_phi))
    return SearchGrid(ds, _merge(np.concatenate(ps)))


def _merge(x, tol=1e-12):
    x = np.sort(x)
    keep = np.concatenate([[True], np.diff(x) > tol * np.maximum(1.0, np.abs(x[1:]))])
    return x[keep]


def domp_step(r_residual, grid, design, geom, mask=None):
    """Grid point maximising ``|a^H r|^2 / ||a||^2`` and its matched gain."""
    m = check_mask(mask, geom.n_antennas)
    r = check_complex_vector(r_residual, geom.n_antennas)[m]
    dd, pp = grid.points
    best = (-1.0, None)
    # Chunked so the dictionary never exceeds a few tens of MB.
    step = max(1, 200_000 // geom.n_antennas)
    for i in range(0, dd.size, step):
        A = response_matrix(design, geom, dd[i:i + step], pp[i:i + step])[:, m]
        corr = A.conj() @ r
        norm2 = np.einsum("ij,ij->i", A.conj(), A).real
        obj = np.abs(corr) ** 2 / norm2
        j = int(np.argmax(obj))
        if obj[j] > best[0]:
            best = (obj[j], (dd[i + j], pp[i + j], corr[j] / norm2[j]))
    d, phi, g = best[1]
    return float(d), float(phi), complex(g)


# ---------------------------------------------------------------- stage 3

def _objective(design, geom, m, r, d, phi, order):
    out = response_derivatives(design, geom, d, phi, order=order)
    a = out["a"][m]
    u = np.vdot(a, r)
    v = np.vdot(a, a).real
    S = abs(u) ** 2 / v
    if order == 0:
        return S
    return S, u, v, {k: val[m] for k, val in out.items()}


def _grad_hess(S, u, v, der, r, angle_only):
    a = der["a"]
    names = ["phi"] if angle_only else ["d", "phi"]
    first = {x: der["a_" + x] for x in names}
    second = {("d", "d"): "a_dd", ("d", "phi"): "a_dphi", ("phi", "phi"): "a_phiphi"}
    n = len(names)
    grad = np.zeros(n)
    hess = np.zeros((n, n))
    u_x = {x: np.vdot(first[x], r) for x in names}
    v_x = {x: 2 * np.vdot(first[x], a).real for x in names}
    U_x = {x: 2 * (np.conj(u) * u_x[x]).real for x in names}
    U = abs(u) ** 2
    for i, x in enumerate(names):
        grad[i] = (U_x[x] * v - U * v_x[x]) / v**2
        for j, y in enumerate(names):
            if j < i:
                continue
            a_xy = der[second[(x, y)] if (x, y) in second else second[(y, x)]]
            u_xy = np.vdot(a_xy, r)
            v_xy = 2 * (np.vdot(a_xy, a) + np.vdot(first[x], first[y])).real
            U_xy = 2 * (np.conj(u_x[x]) * u_x[y] + np.conj(u) * u_xy).real
            h = (U_xy / v - (U_x[x] * v_x[y] + U_x[y] * v_x[x]) / v**2
                 - U * v_xy / v**2 + 2 * U * v_x[x] * v_x[y] / v**3)
            hess[i, j] = hess[j, i] = h
    return grad, hess


def _in_domain(d, phi, d_max):
    return d > 0 and abs(phi) < _PHI_LIMIT and (d_max is None or d <= d_max)


def newton_refine(r_residual, d, phi, g, design, geom, mask=None, iters=5,
                  angle_only=False, d_max=None):
    """Newton ascent on ``S(d, phi) = |a^H r|^2/||a||^2`` with gain re-fit.

    A step is accepted only if the residual power ``||r - g a||^2`` drops
    (equivalently ``S`` rises). When the Hessian is not negative definite,
    or the Newton step is rejected, a diagonally scaled gradient step with
    backtracking is tried instead. Returns ``(d, phi, g)``.
    """
    m = check_mask(mask, geom.n_antennas)
    r = check_complex_vector(r_residual, geom.n_antennas)[m]
    S, u, v, der = _objective(design, geom, m, r, d, phi, order=2)
    g = u / v
    for _ in range(iters):
        grad, hess = _grad_hess(S, u, v, der, r, angle_only)
        if not np.all(np.isfinite(grad)) or not np.any(grad):
            break
        steps = []
        if np.all(np.linalg.eigvalsh(hess) < 0):
            steps.append(-np.linalg.solve(hess, grad))
        scale = np.abs(np.diag(hess))
        scale[scale == 0] = 1.0
        base = grad / scale
        steps += [base * 0.5**k for k in range(12)]
        moved = False
        for step in steps:
            nd = d if angle_only else d + step[0]
            nphi = phi + step[-1]
            if not _in_domain(nd, nphi, d_max):
                continue
            S_new = _objective(design, geom, m, r, nd, nphi, order=0)
            if S_new > S:
                d, phi = nd, nphi
                S, u, v, der = _objective(design, geom, m, r, d, phi, order=2)
                g = u / v
                moved = True
                break
        if not moved:
            break
    return float(d), float(phi), complex(g)


# ---------------------------------------------------------------- pipeline

def _responses(design, geom, paths, m):
    return np.stack([response_matrix(design, geom, [p[0]], [p[1]])[0, m] for p in paths], axis=1)


def _refit_gains(design, geom, m, r, locs):
    A = _responses(design, geom, locs, m)
    g = solve_least_squares(A, r)
    resid = r - A @ g
    return g, A, float(np.vdot(resid, resid).real)


def estimate_paths(r, design, geom, cfg=None):
    """Run the full estimator on one snapshot ``r`` (length N_a).

    Path ``l`` is extracted by grid OMP on the current residual, refined by
    Newton steps, and then all paths are cyclically re-refined against the
    residual that excludes each of them. Extraction stops early once the
    residual power falls below 1.5 times the expected noise power (when
    ``cfg.noise_var`` is known).
    """
    cfg = cfg or EstimatorConfig()
    m = check_mask(cfg.selection_mask, geom.n_antennas)
    r_full = check_complex_vector(r, geom.n_antennas)
    r_full = np.where(m, r_full, 0)
    r_m = r_full[m]
    d_max = cfg.d_max if cfg.d_max is not None else _default_d_max(design)

    masked = not m.all()
    try:
        windows = detect_windows(r_full, geom, cfg.window_threshold_db,
                                 cfg.min_window_antennas, m)
    except NoWindowFoundError:
        if not masked:
            raise
        # a sparse selection can leave a single antenna per window
        windows = detect_windows(r_full, geom, cfg.window_threshold_db, 1, m)
    log_grid = cfg.coarse_distance == "log-grid" or (cfg.coarse_distance == "auto" and masked)
    if log_grid:
        grid = _log_distance_grid(windows[:cfg.L], design, cfg, d_max)
        angle_only = False
    else:
        coarse, angle_only = [], False
        for w in windows[:cfg.L]:
            lo, hi = locate_edges(r_full, geom, w)
            if not hi > lo:
                lo, hi = w
            for src, capped in coarse_candidates(max(lo, -1 + 1e-9), min(hi, 1 - 1e-9),
                                                 design, d_max):
                coarse.append(src)
                angle_only = angle_only or capped
        grid = build_search_grid(coarse, cfg, angle_only=angle_only)

    floor = None if cfg.noise_var is None else 1.5 * m.sum() * cfg.noise_var
    history = [float(np.vdot(r_m, r_m).real)]
    locs, gains = [], np.zeros(0, dtype=np.complex128)
    grid_locs = []
    resid = r_full.copy()
    for _ in range(cfg.L):
        if floor is not None and history[-1] <= floor:
            break
        d, phi, g = domp_step(resid, grid, design, geom, m)
        grid_hit = (d, phi)
        if cfg.refine:
            d, phi, g = newton_refine(resid, d, phi, g, design, geom, m,
                                      cfg.newton_iters, angle_only, d_max)
        trial = locs + [(d, phi)]
        try:
            new_gains, A, power = _refit_gains(design, geom, m, r_m, trial)
        except ArithmeticError:
            break
        if power > history[-1]:
            break
        locs, gains = trial, new_gains
        grid_locs.append(grid_hit)
        resid = r_full.copy()
        resid[m] = r_m - A @ gains
        history.append(power)

    if cfg.refine and locs:
        for _ in range(cfg.cyclic_rounds):
            for l in range(len(locs)):
                others = [k for k in range(len(locs)) if k != l]
                r_l = r_full.copy()
                if others:
                    A_o = _responses(design, geom, [locs[k] for k in others], m)
                    r_l[m] = r_m - A_o @ gains[others]
                d, phi, _ = newton_refine(r_l, *locs[l], gains[l], design, geom, m,
                                          cfg.newton_iters, angle_only, d_max)
                trial = list(locs)
                trial[l] = (d, phi)
                new_gains, A, power = _refit_gains(design, geom, m, r_m, trial)
                if power < history[-1]:
                    locs, gains = trial, new_gains
                    history.append(power)

    paths = [PathParams(g, d, phi) for (d, phi), g in zip(locs, gains)]
    h = build_channel(design, geom, paths).h if paths else np.zeros(geom.n_antennas, complex)
    grid_paths = []
    if grid_locs:
        try:
            grid_gains = _refit_gains(design, geom, m, r_m, grid_locs)[0]
        except ArithmeticError:
            grid_gains = gains
        grid_paths = [PathParams(g, d, phi) for (d, phi), g in zip(grid_locs, grid_gains)]
    return EstimationResult(paths, np.asarray(h), history, [angle_only] * len(paths),
                            grid_paths)


class ExLensLocalizer(BaseEstimator):
    """scikit-learn style wrapper around :func:`estimate_paths`.

    ``fit(r)`` estimates from one snapshot and exposes ``paths_``,
    ``channel_`` and ``residual_history_``. ``predict`` returns per-snapshot
    ``(d, phi)`` arrays and ``transform`` the reconstructed channels.
    """

    def __init__(self, design=None, n_paths=1, delta_d=None, rel_delta_d=0.3,
                 delta_phi=0.05, n_grid_d=32, n_grid_phi=32, newton_iters=5,
                 cyclic_rounds=3, window_threshold_db=-10.0, selection_mask=None,
                 noise_var=None, d_max=None, refine=True, coarse_distance="auto"):
        self.design = design
        self.n_paths = n_paths
        self.delta_d = delta_d
        self.rel_delta_d = rel_delta_d
        self.delta_phi = delta_phi
        self.n_grid_d = n_grid_d
        self.n_grid_phi = n_grid_phi
        self.newton_iters = newton_iters
        self.cyclic_rounds = cyclic_rounds
        self.window_threshold_db = window_threshold_db
        self.selection_mask = selection_mask
        self.noise_var = noise_var
        self.d_max = d_max
        self.refine = refine
        self.coarse_distance = coarse_distance

    def _config(self):
        return EstimatorConfig(
            L=self.n_paths, delta_d=self.delta_d, rel_delta_d=self.rel_delta_d,
            delta_phi=self.delta_phi, N_d=self.n_grid_d, N_phi=self.n_grid_phi,
            newton_iters=self.newton_iters, cyclic_rounds=self.cyclic_rounds,
            window_threshold_db=self.window_threshold_db,
            selection_mask=self.selection_mask, noise_var=self.noise_var,
            d_max=self.d_max, refine=self.refine, coarse_distance=self.coarse_distance)

    def _check_design(self):
        if not isinstance(self.design, LensDesign):
            raise GeometryError("design must be a LensDesign")
        return self.design, ArrayGeometry.lens(self.design)

    def fit(self, r, y=None):
        design, geom = self._check_design()
        res = estimate_paths(check_complex_vector(r, geom.n_antennas), design, geom,
                             self._config())
        self.result_ = res
        self.paths_ = res.paths
        self.channel_ = res.h
        self.residual_history_ = res.residual_power_history
        self.n_features_in_ = geom.n_antennas
        return self

    def _run_all(self, R):
        design, geom = self._check_design()
        R = check_complex_matrix(R, geom.n_antennas, name="R")
        cfg = self._config()
        return [estimate_paths(row, design, geom, cfg) for row in R]

    def predict(self, R):
        """Array of shape ``(n_snapshots, n_paths, 2)`` with ``(d, phi)``;
        missing paths are NaN."""
        out = np.full((len(np.atleast_2d(R)), self.n_paths, 2), np.nan)
        for i, res in enumerate(self._run_all(R)):
            for l, p in enumerate(res.paths):
                out[i, l] = p.d, p.phi
        return out

    def transform(self, R):
        """Reconstructed channels, shape ``(n_snapshots, N_a)``."""
        return np.stack([res.h for res in self._run_all(R)])
