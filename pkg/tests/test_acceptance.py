"""Acceptance checks. Each test prints one PASS/FAIL line; the lines are
repeated in the pytest terminal summary. Run directly with
``python3 tests/test_acceptance.py`` to get only the lines."""

import math
import time

import numpy as np
import pytest

from exlens.channel import PathParams, build_channel, draw_preset_paths
from exlens.estimator import detect_windows
from exlens.experiments import config_from_dict, preset, run_experiment
from exlens.experiments.config import PRESETS
from exlens.experiments.runners import run_localize_mc, sumrate_draws
from exlens.fisher import fim, peb, response_grad, response_grad_fd
from exlens.geometry import ArrayGeometry, LensDesign, SourcePoint, window_edges
from exlens.multiuser import combiner_set, power_control_inversion, select_antennas_power, sum_rate
from exlens.response import response_closed_form, response_far_field_sinc

RESULTS = {}


def record(n, title, ok, detail):
    line = f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    RESULTS[n] = line
    print(line)
    return ok


# 1 ------------------------------------------------------------------------

def test_01_closed_form_fidelity():
    start = time.perf_counter()
    cfg = preset("fig4")
    table = run_experiment(cfg)
    worst = {}
    for variant in ("design1", "design2"):
        for phi in cfg.params["phis"]:
            rows = [r for r in table.rows if r[0] == variant and r[2] == phi]
            exact = np.array([r[5] for r in rows])
            err = np.array([r[7] for r in rows])
            strong = exact**2 >= exact.max() ** 2 / 100
            worst[(variant, round(math.degrees(phi)))] = float(err[strong].max())
    bad = {k: v for k, v in worst.items() if v > 0.03}
    ok = not bad
    detail = ", ".join(f"{v[-1]}@{deg:+d}deg {e:.1%}" for (v, deg), e in sorted(worst.items()))
    record(1, "closed form vs exact-distance integral within 3%", ok,
           f"max error within 20 dB of peak: {detail} ({time.perf_counter() - start:.0f} s)")
    assert ok, f"{len(bad)} of {len(worst)} curves exceed 3%"


# 2 ------------------------------------------------------------------------

def _far_field_error(F):
    design = LensDesign.design2(1.0, F, 1e6, 0.01)
    s = np.sin(np.linspace(-np.pi / 2, np.pi / 2, 401))
    worst = 0.0
    for phi in (0.0, 0.3, -0.7):
        a = response_closed_form(design, s, SourcePoint(1e6, phi))
        worst = max(worst, float(np.max(np.abs(a - response_far_field_sinc(1.0, s, phi, 0.01)))))
    return worst / design.aperture


def test_02_far_field_limit():
    err = _far_field_error(5.0)
    err_large_f = _far_field_error(1e6)
    ok = err <= 1e-3
    record(2, "far-field limit d = F0 = 1e6 m reduces to D sinc", ok,
           f"max |a - D sinc| / D = {err:.3g} at F = 5 m; {err_large_f:.2g} with F = 1e6 m too")
    assert ok


# 3 ------------------------------------------------------------------------

def test_03_window_law():
    parts, ok = [], True
    for De in (100.0, 200.0):
        design = LensDesign.design2(De * 0.01, 5.0, 15.0, 0.01)
        geom = ArrayGeometry.lens(design)
        src = SourcePoint(50.0, 0.0)
        lo, hi = detect_windows(response_closed_form(design, geom.sin_theta, src), geom)[0]
        w = window_edges(design, src)
        center_ok = abs(0.5 * (lo + hi) - np.sin(src.phi)) <= geom.pitch
        ratio = (hi - lo) / w.width_approx
        s = np.linspace(-1, 1, 40001)
        p = np.abs(response_closed_form(design, s, src)) ** 2
        above = s[p >= p.max() / 10]
        dense_ratio = (above[-1] - above[0]) / w.width_approx
        width_ok = abs(ratio - 1) <= 0.1 and abs(dense_ratio - 1) <= 0.1
        ok = ok and center_ok and width_ok
        parts.append(f"D~={De:.0f}: center {'ok' if center_ok else 'off'}, width/approx "
                     f"{ratio:.3f} sampled, {dense_ratio:.3f} fine grid, "
                     f"erf-zero width/approx {w.width / w.width_approx:.3f}")
    record(3, "-10 dB window center within 1/N, width within 10%", ok, "; ".join(parts))
    assert ok


# 4 ------------------------------------------------------------------------

def test_04_gradient_audit():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(100):
        De = rng.uniform(50, 200)
        F = rng.uniform(3, 10)
        if rng.random() < 0.5:
            design = LensDesign.design1(De * 0.01, F, 0.01)
        else:
            design = LensDesign.design2(De * 0.01, F, rng.uniform(3, 20), 0.01)
        geom = ArrayGeometry.lens(design)
        src = SourcePoint(rng.uniform(5, 60), rng.uniform(-1, 1))
        for a, b in zip(response_grad(design, geom, src), response_grad_fd(design, geom, src)):
            worst = max(worst, float(np.abs(a - b).max() / np.abs(b).max()))
    ok = worst <= 1e-5
    record(4, "analytic gradients vs Richardson differences", ok,
           f"worst relative error over 100 configs {worst:.2g}")
    assert ok


# 5 ------------------------------------------------------------------------

def test_05_bound_scalings():
    design = LensDesign.design2(1.0, 5.0, 5.0, 0.01)
    geom = ArrayGeometry.lens(design)
    paths = [PathParams(1.0, 12.8657, -0.1935), PathParams(0.5j, 14.4962, 0.1897)]
    nv = 1e-3
    F = fim(design, geom, paths, nv)
    fim_dev = float(np.max(np.abs(fim(design, geom, paths, nv / 10) - 10 * F)) / np.abs(F).max())
    ratio = peb(design, geom, paths, 4 * nv) / peb(design, geom, paths, nv)
    ok = fim_dev <= 1e-13 and abs(ratio - 2) <= 2e-10
    record(5, "FIM x10 under sigma^2/10, PEB x2 under sigma x2", ok,
           f"FIM deviation {fim_dev:.1g} (floating rounding), PEB ratio - 2 = {ratio - 2:.1g}")
    assert ok


# 6, 7 ----------------------------------------------------------------------

@pytest.fixture(scope="module")
def fig6_table():
    start = time.perf_counter()
    table = run_localize_mc(preset("fig6-l1", trials=100))
    return table, time.perf_counter() - start


def _row(table, snr, method):
    (row,) = table.where(snr_db=snr, method=method)
    return dict(zip(table.columns, row))


def test_06_localization(fig6_table):
    table, elapsed = fig6_table
    r20, r40 = _row(table, 20.0, "refined"), _row(table, 40.0, "refined")
    checks = [r20["rmse_phi"] <= 2 * r20["crlb_phi"], r20["rmse_u"] < 1.0, r40["rmse_u"] < 0.1]
    better = []
    for snr in (20.0, 30.0, 40.0):
        ref, grid = _row(table, snr, "refined"), _row(table, snr, "domp")
        better.append(ref["rmse_u"] < grid["rmse_u"] and ref["rmse_phi"] < grid["rmse_phi"])
    ok = all(checks) and all(better) and elapsed <= 600
    record(6, "L=1 localization at desk scale (T=100)", ok,
           f"20 dB: RMSE(phi)/CRLB {r20['rmse_phi'] / r20['crlb_phi']:.2f}, "
           f"RMSE(u) {r20['rmse_u']:.3g} m; 40 dB: RMSE(u) {r40['rmse_u']:.3g} m; "
           f"refined beats grid-only at 20/30/40 dB: {all(better)}; {elapsed:.0f} s")
    assert ok


def test_07_channel_reconstruction(fig6_table):
    table, _ = fig6_table
    snrs = [0.0, 10.0, 20.0, 30.0, 40.0]
    nmse = [_row(table, s, "refined")["nmse"] for s in snrs]
    monotone = all(b <= 1.5 * a for a, b in zip(nmse, nmse[1:]))
    ok = monotone and nmse[3] <= 1e-2
    record(7, "NMSE(h) falls with SNR, <= 1e-2 at 30 dB", ok,
           "NMSE " + ", ".join(f"{s:.0f} dB {v:.2g}" for s, v in zip(snrs, nmse)))
    assert ok


# 8 ------------------------------------------------------------------------

def test_08_single_user_identity():
    design = LensDesign.design2(1.0, 5.0, 15.0, 0.01)
    geom = ArrayGeometry.lens(design)
    worst = 0.0
    for seed in range(50):
        ch = build_channel(design, geom, draw_preset_paths(2, seed))
        p = power_control_inversion([ch])
        nv = 1.0 / (geom.n_antennas * 10.0)
        Hs = select_antennas_power([ch], 5, p).apply(ch.h[:, None])
        r_mrc = sum_rate(combiner_set(Hs, p, nv, "mrc"), Hs, p, nv)
        r_mmse = sum_rate(combiner_set(Hs, p, nv, "mmse"), Hs, p, nv)
        worst = max(worst, abs(r_mrc - r_mmse) / r_mrc)
    ok = worst <= 1e-9
    record(8, "K=1 MRC and MMSE rates coincide", ok, f"worst relative gap {worst:.2g}")
    assert ok


# 9 ------------------------------------------------------------------------

def test_09_multiuser_comparison():
    start = time.perf_counter()
    raw = PRESETS["fig8"]
    cfg = config_from_dict({**raw, "trials": 200, "params": {
        **raw["params"], "schemes": ["LENS-MMSE", "LENS-MRC", "ULA-MMSE"]}})
    rates = sumrate_draws(cfg, 10.0)
    wins = float(np.mean(rates["LENS-MMSE"] > rates["ULA-MMSE"]))
    ok = wins >= 0.95 and rates["LENS-MMSE"].mean() > rates["LENS-MRC"].mean()
    record(9, "LENS-MMSE beats ULA-MMSE per draw and LENS-MRC on average", ok,
           f"wins {wins:.1%} of 200 draws; means LENS-MMSE {rates['LENS-MMSE'].mean():.1f}, "
           f"LENS-MRC {rates['LENS-MRC'].mean():.1f}, ULA-MMSE {rates['ULA-MMSE'].mean():.1f} "
           f"bit/s/Hz; {time.perf_counter() - start:.0f} s")
    assert ok


# 10 -----------------------------------------------------------------------

def test_10_aperture_sweep():
    start = time.perf_counter()
    raw = PRESETS["fig10"]
    cfg = config_from_dict({**raw, "trials": 100,
                            "params": {**raw["params"], "schemes": ["LENS-MMSE"]}})
    apertures = cfg.params["values"]
    means = [float(sumrate_draws(cfg, De)["LENS-MMSE"].mean()) for De in apertures]
    k = int(np.argmax(means))
    unimodal = (all(a < b for a, b in zip(means[:k], means[1:k + 1]))
                and all(a > b for a, b in zip(means[k:], means[k + 1:])))
    ok = 0 < k < len(means) - 1 and unimodal
    record(10, "lens sum rate unimodal in aperture with interior peak", ok,
           ", ".join(f"{De:.0f}: {m:.1f}" for De, m in zip(apertures, means))
           + f" (peak at {apertures[k]:.0f}); {time.perf_counter() - start:.0f} s")
    assert ok


# 11 -----------------------------------------------------------------------

def test_11_determinism():
    configs = [
        config_from_dict({**PRESETS["fig3"], "params": {**PRESETS["fig3"]["params"],
                                                        "n_points": 101}}),
        preset("fig3-window"),
        config_from_dict({**PRESETS["fig5a"], "params": {**PRESETS["fig5a"]["params"],
                                                         "d_values": [10.0, 18.0]}}),
        config_from_dict({**PRESETS["fig6-l1"], "trials": 3,
                          "params": {**PRESETS["fig6-l1"]["params"], "snr_db": [10.0, 30.0]}}),
        config_from_dict({**PRESETS["fig10"], "trials": 5}),
    ]
    same = [run_experiment(c).to_csv() == run_experiment(c).to_csv() for c in configs]
    ok = all(same)
    record(11, "identical config and seed give byte-identical tables", ok,
           f"{sum(same)}/{len(same)} experiment kinds identical")
    assert ok


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-q", "-s"]))
