"""Error metrics over Monte Carlo trials and multipath association."""

import numpy as np

from .exceptions import GeometryError

__all__ = ["metrics_rmse", "metrics_nmse", "associate_paths", "position"]


def metrics_rmse(estimates, truth):
    """``sqrt(sum_i ||x_i - x||^2 / T)`` for scalar or vector estimates."""
    est = [np.atleast_1d(np.asarray(e, dtype=float)) for e in estimates]
    if not est:
        raise ValueError("at least one trial is required")
    truth = np.atleast_1d(np.asarray(truth, dtype=float))
    sq = [np.sum((e - truth) ** 2) for e in est]
    return float(np.sqrt(np.mean(sq)))


def metrics_nmse(h_true, h_estimates):
    """Mean of ``||h - h_i||^2 / ||h||^2`` over trials."""
    h = np.asarray(h_true, dtype=np.complex128)
    energy = np.vdot(h, h).real
    if energy == 0:
        raise GeometryError("NMSE is undefined for a zero channel")
    errs = [np.vdot(h - e, h - e).real / energy for e in h_estimates]
    if not errs:
        raise ValueError("at least one trial is required")
    return float(np.mean(errs))


def position(d, phi):
    return np.array([-d * np.cos(phi), d * np.sin(phi)])


def associate_paths(estimated, truth, d_scale):
    """Match estimated paths to true ones.

    Greedy nearest-neighbour in ``(sin(phi), d/d_scale)``; returns a list
    aligned with ``truth`` holding the matched estimate or None.
    """
    est = list(estimated)
    pairs = []
    for i, t in enumerate(truth):
        for j, e in enumerate(est):
            dist = np.hypot(np.sin(e.phi) - np.sin(t.phi), (e.d - t.d) / d_scale)
            pairs.append((dist, i, j))
    pairs.sort()
    out = [None] * len(truth)
    used = set()
    for _, i, j in pairs:
        if out[i] is None and j not in used:
            out[i] = est[j]
            used.add(j)
    return out
