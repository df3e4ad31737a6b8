"""Experiment runners. Each takes a validated ``ScenarioConfig`` and returns
a ``ResultTable`` whose rows are sorted by the sweep keys."""

import warnings
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from ..channel import PathParams, build_channel, draw_preset_paths, noise_var_for_target_snr
from ..estimator import EstimatorConfig, estimate_paths
from ..exceptions import (ExLensError, FarFieldDegenerateError, FarFieldWarning,
                          NoWindowFoundError, SingularMatrixError)
from ..fisher import fisher_analysis
from ..geometry import ArrayGeometry, LensDesign, SourcePoint, window_edges
from ..metrics import associate_paths, metrics_nmse, metrics_rmse, position
from ..multiuser import (combiner_set, gs_analog_combiner, power_control_inversion,
                         select_antennas_power, sum_rate, whiten_effective)
from ..numerics import make_rng
from ..response import (response_closed_form, response_far_field_sinc,
                        response_integral_oracle, response_vector)
from ..estimator import detect_windows
from .config import dump_config
from .table import ResultTable

__all__ = [
    "RUNNERS",
    "run_experiment",
    "run_response_profile",
    "run_window_sweep",
    "run_peb_map",
    "run_localize_mc",
    "run_sumrate_sweep",
    "sumrate_draws",
]

GAIN_NOTE = "stand-in: |g| log-uniform in [0.1, 1], uniform phase"


def _table(cfg, columns, **meta):
    meta = {"experiment": cfg.experiment, "seed": cfg.seed, "trials": cfg.trials, **meta}
    if cfg.preset:
        meta["preset"] = cfg.preset
    return ResultTable(columns, metadata=meta, config_text=dump_config(cfg))


def _map(fn, items, workers):
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


# ------------------------------------------------------------ response profile

def run_response_profile(cfg, workers=1):
    p = cfg.params
    t = _table(cfg, ["design", "electrical_aperture", "phi", "sin_theta", "abs_closed_form",
                     "abs_oracle", "abs_far_field", "rel_error"])
    s = np.linspace(-1, 1, p["n_points"])
    for variant in p["designs"] or [cfg.lens["design"]]:
        for De in p["apertures"]:
            design = cfg.design(De, variant)
            for phi in p["phis"]:
                src = SourcePoint(p["d"], phi)
                closed = np.abs(response_closed_form(design, s, src))
                far = np.abs(response_far_field_sinc(design.aperture, s, phi,
                                                     design.wavelength))
                if p["oracle"]:
                    exact = np.abs(response_integral_oracle(design, s, src,
                                                            p["oracle_rel_tol"]))
                    err = np.abs(closed - exact) / np.maximum(exact, 1e-300)
                else:
                    exact = err = np.full(s.size, np.nan)
                for row in zip(s, closed, exact, far, err):
                    t.add(variant, De, phi, *row)
    return t.sort(4)


# ------------------------------------------------------------- window sweep

def _dense_window(design, src, threshold_db, n=20001):
    """-threshold window measured on a fine sin(theta) grid (noise free)."""
    s = np.linspace(-1, 1, n)
    p = np.abs(response_closed_form(design, s, src)) ** 2
    above = np.flatnonzero(p >= p.max() * 10 ** (threshold_db / 10))
    return s[above[0]], s[above[-1]]


def run_window_sweep(cfg, workers=1):
    p = cfg.params
    t = _table(cfg, ["electrical_aperture", "phi", "v1", "v2", "center_exact", "width_exact",
                     "center_approx", "width_approx", "detected_center", "detected_width",
                     "dense_center", "dense_width", "width_ratio", "pitch"])
    for De in p["apertures"]:
        design = cfg.design(De)
        geom = ArrayGeometry.lens(design)
        for phi in p["phis"]:
            src = SourcePoint(p["d"], phi)
            try:
                w = window_edges(design, src)
            except FarFieldDegenerateError:
                t.add(De, phi, *[None] * 12)
                continue
            h = response_vector(design, geom, src)
            lo, hi = detect_windows(h, geom, p["threshold_db"])[0]
            dlo, dhi = _dense_window(design, src, p["threshold_db"])
            t.add(De, phi, w.v1, w.v2, w.center, w.width, w.center_approx, w.width_approx,
                  0.5 * (lo + hi), hi - lo, 0.5 * (dlo + dhi), dhi - dlo,
                  (dhi - dlo) / w.width_approx, geom.pitch)
    return t.sort(2)


# ------------------------------------------------------------------ PEB map

def _peb_point(design, d, phi, snr_db, oracle):
    geom = ArrayGeometry.lens(design)
    path = PathParams(1.0, d, phi)
    h = build_channel(design, geom, [path]).h
    nv = noise_var_for_target_snr(h, snr_db)
    out = [None] * 4
    status = "ok"
    try:
        res = fisher_analysis(design, geom, [path], nv)
        out[:3] = res.peb, res.crlb_d, res.crlb_phi
        if oracle:
            out[3] = fisher_analysis(design, geom, [path], nv, gradients="oracle").peb
    except SingularMatrixError:
        status = "singular"
    return out, status


def run_peb_map(cfg, workers=1):
    """PEB over (d, phi) or over (D_y, F0), noise set per point from the target SNR."""
    p = cfg.params
    t = _table(cfg, ["aperture_m", "f0", "d", "phi", "peb", "crlb_d", "crlb_phi", "opeb",
                     "status"], snr_db=p["snr_db"])
    lam = cfg.lens["wavelength"]
    if p["mode"] == "d-phi":
        design = cfg.design()
        cells = [(design, d, phi) for d in p["d_values"] for phi in p["phi_values"]]
    else:
        cells = []
        for Dy in p["aperture_values"]:
            for F0 in p["f0_values"]:
                design = cfg.design(Dy / lam, "design2", F0)
                cells.append((design, p["d"], p["phi"]))
    for design, d, phi in cells:
        vals, status = _peb_point(design, d, phi, p["snr_db"], p["oracle"])
        f0 = design.source_focal_distance
        t.add(design.aperture, f0, d, phi, *vals, status)
    return t.sort(4)


# ----------------------------------------------------------- localization MC

def _localize_trial(args):
    design, paths, h, noise_vars, est_kw, seed = args
    geom = ArrayGeometry.lens(design)
    rng = make_rng(seed)
    w = (rng.standard_normal(h.size) + 1j * rng.standard_normal(h.size)) / np.sqrt(2)
    out = []
    for nv in noise_vars:
        r = h + np.sqrt(nv) * w
        cfg = EstimatorConfig(L=len(paths), noise_var=nv, **est_kw)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", FarFieldWarning)
            try:
                res = estimate_paths(r, design, geom, cfg)
                refined, grid = res.paths, res.grid_paths
            except (NoWindowFoundError, FarFieldDegenerateError):
                refined, grid = [], []
        out.append((refined, grid))
    return out


def _summarize(design, paths, h, estimates):
    """RMSE of d, phi and position, NMSE of the channel, and missed-path count."""
    geom = ArrayGeometry.lens(design)
    d_true = np.array([q.d for q in paths])
    phi_true = np.array([q.phi for q in paths])
    u_true = np.concatenate([position(q.d, q.phi) for q in paths])
    ds, phis, us, hs, missed = [], [], [], [], 0
    for est in estimates:
        matched = associate_paths(est, paths, d_scale=float(np.mean(d_true)))
        d_hat, phi_hat, u_hat = [], [], []
        for m in matched:
            if m is None:
                missed += 1
                d_hat.append(0.0)
                phi_hat.append(0.0)
                u_hat.extend([0.0, 0.0])
            else:
                d_hat.append(m.d)
                phi_hat.append(m.phi)
                u_hat.extend(position(m.d, m.phi))
        ds.append(d_hat)
        phis.append(phi_hat)
        us.append(u_hat)
        hs.append(build_channel(design, geom, est).h if est else np.zeros_like(h))
    return (metrics_rmse(ds, d_true), metrics_rmse(phis, phi_true), metrics_rmse(us, u_true),
            metrics_nmse(h, hs), missed)


def localize_estimates(cfg, workers=1):
    """Per-SNR lists of (refined, grid-only) estimates for every trial."""
    p = cfg.params
    design = cfg.design()
    geom = ArrayGeometry.lens(design)
    paths = [PathParams(complex(q["g_re"], q["g_im"]), q["d"], q["phi"]) for q in p["paths"]]
    h = build_channel(design, geom, paths).h
    noise_vars = [noise_var_for_target_snr(h, s) for s in p["snr_db"]]
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.trials)
    jobs = [(design, paths, h, noise_vars, p["estimator"], s) for s in seeds]
    per_trial = _map(_localize_trial, jobs, workers)
    return design, paths, h, noise_vars, per_trial


def run_localize_mc(cfg, workers=1):
    p = cfg.params
    design, paths, h, noise_vars, per_trial = localize_estimates(cfg, workers)
    geom = ArrayGeometry.lens(design)
    t = _table(cfg, ["snr_db", "method", "rmse_d", "crlb_d", "rmse_phi", "crlb_phi",
                     "rmse_u", "peb", "nmse", "missed"],
               trials_note="desk-scale trial count; RMSE spread scales as 1/sqrt(trials)")
    for i, (snr, nv) in enumerate(zip(p["snr_db"], noise_vars)):
        try:
            fi = fisher_analysis(design, geom, paths, nv)
            bounds = fi.crlb_d, fi.crlb_phi, fi.peb
        except SingularMatrixError:
            bounds = None, None, None
        for k, method in enumerate(("refined", "domp")):
            est = [trial[i][k] for trial in per_trial]
            rd, rphi, ru, nmse, missed = _summarize(design, paths, h, est)
            t.add(snr, method, rd, bounds[0], rphi, bounds[1], ru, bounds[2], nmse, missed)
    return t.sort(2)


# --------------------------------------------------------------- sum rate

def _axis_setting(p, value):
    K, m_rf, snr, De = p["users"], p["m_rf"], p["snr_db"], None
    if p["axis"] == "snr":
        snr = value
    elif p["axis"] == "m_rf":
        m_rf = int(value)
    elif p["axis"] == "k":
        K = int(value)
    else:
        De = value
    return K, m_rf, snr, De


def _scheme_rates(H, powers, m_rf, noise_var, kinds):
    sel = select_antennas_power(list(H.T), m_rf, powers)
    Hs = sel.apply(H)
    return {k: sum_rate(combiner_set(Hs, powers, noise_var, k), Hs, powers, noise_var)
            for k in kinds}, sel


def _estimated_rates(design, geom, H, sel, powers, noise_var, n_paths, seed):
    """Lens rates with combiners built from channels estimated on the selected
    antennas (pilot noise ``noise_var / p_k``); rates use the true channels."""
    rng = make_rng(seed)
    Hs_true = sel.apply(H)
    H_hat = np.zeros_like(H)
    for k in range(H.shape[1]):
        nv = noise_var / powers[k]
        w = (rng.standard_normal(H.shape[0]) + 1j * rng.standard_normal(H.shape[0]))
        r = H[:, k] + np.sqrt(nv / 2) * w
        cfg = EstimatorConfig(L=n_paths, noise_var=nv, selection_mask=sel.mask)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", FarFieldWarning)
            try:
                H_hat[:, k] = estimate_paths(r, design, geom, cfg).h
            except ExLensError:
                H_hat[:, k] = np.where(sel.mask, r, 0)
    Hs_hat = sel.apply(H_hat)
    out = {}
    for kind in ("mmse", "mrc"):
        try:
            U = combiner_set(Hs_hat, powers, noise_var, kind)
            out[kind] = sum_rate(U, Hs_true, powers, noise_var)
        except ExLensError:
            out[kind] = 0.0
    return out


def _sumrate_draw(args):
    cfg_lens, p, value, seed = args
    K, m_rf, snr, De = _axis_setting(p, value)
    lam = cfg_lens["wavelength"]
    De = cfg_lens["electrical_aperture"] if De is None else De
    variant = cfg_lens["design"]
    design = LensDesign(variant, De * lam, cfg_lens["focal_length"], lam,
                        cfg_lens["source_focal_distance"] if variant == "design2" else None)
    g_lens = ArrayGeometry.lens(design)
    g_ula = ArrayGeometry.ula(De, lam)
    user_seeds = seed.spawn(K + 1)
    user_paths = [draw_preset_paths(p["paths_per_user"], user_seeds[k], tuple(p["d_range"]),
                                    p["phi_max"]) for k in range(K)]
    schemes = p["schemes"]
    rates = {}
    lens_kinds = [s.split("-")[1].lower() for s in schemes if s.startswith("LENS-")]
    sel = None
    if lens_kinds or p["estimated_csi"]:
        chans = [build_channel(design, g_lens, ps) for ps in user_paths]
        H = np.stack([c.h for c in chans], axis=1)
        powers = power_control_inversion(chans)
        nv = 1.0 / (H.shape[0] * 10 ** (snr / 10))
        got, sel = _scheme_rates(H, powers, m_rf, nv, set(lens_kinds) | {"mmse", "mrc"})
        for kind in lens_kinds:
            rates[f"LENS-{kind.upper()}"] = got[kind]
        if p["estimated_csi"]:
            est = _estimated_rates(design, g_lens, H, sel, powers, nv, p["paths_per_user"],
                                   user_seeds[K])
            rates["LENS-MMSE-EST"] = est["mmse"]
            rates["LENS-MRC-EST"] = est["mrc"]
    ula_kinds = [s.split("-")[1].lower() for s in schemes if s in ("ULA-MMSE", "ULA-MRC")]
    if ula_kinds or "ULA-GS-MMSE" in schemes:
        chans = [build_channel(None, g_ula, ps) for ps in user_paths]
        H = np.stack([c.h for c in chans], axis=1)
        powers = power_control_inversion(chans)
        nv = 1.0 / (H.shape[0] * 10 ** (snr / 10))
        if ula_kinds:
            got, _ = _scheme_rates(H, powers, m_rf, nv, ula_kinds)
            for kind in ula_kinds:
                rates[f"ULA-{kind.upper()}"] = got[kind]
        if "ULA-GS-MMSE" in schemes:
            W = gs_analog_combiner(list(H.T), m_rf, p["codebook_size"], p["phase_bits"])
            H_eff = whiten_effective(W, H)
            U = combiner_set(H_eff, powers, nv, "mmse")
            rates["ULA-GS-MMSE"] = sum_rate(U, H_eff, powers, nv)
    return rates


def sumrate_draws(cfg, value, workers=1):
    """Per-draw scheme rates at one sweep value: dict scheme -> array (trials,).

    Draws share seeds across sweep values so the curves use common random
    numbers.
    """
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.trials)
    jobs = [(cfg.lens, cfg.params, value, s) for s in seeds]
    draws = _map(_sumrate_draw, jobs, workers)
    return {k: np.array([d[k] for d in draws]) for k in draws[0]}


def run_sumrate_sweep(cfg, workers=1):
    p = cfg.params
    t = _table(cfg, [p["axis"], "scheme", "mean_sum_rate", "std_err"],
               gain_model=GAIN_NOTE,
               power_control="channel inversion, unit received power per user",
               noise="sigma^2 = 1 / (N_a * 10^(snr/10)) per system")
    for value in p["values"]:
        for scheme, r in sumrate_draws(cfg, value, workers).items():
            err = float(np.std(r, ddof=1) / np.sqrt(r.size)) if r.size > 1 else None
            t.add(value, scheme, float(np.mean(r)), err)
    return t.sort(2)


RUNNERS = {
    "response-profile": run_response_profile,
    "window-sweep": run_window_sweep,
    "peb-map": run_peb_map,
    "localize-mc": run_localize_mc,
    "sumrate-sweep": run_sumrate_sweep,
}


def run_experiment(cfg, workers=1):
    return RUNNERS[cfg.experiment](cfg, workers)
