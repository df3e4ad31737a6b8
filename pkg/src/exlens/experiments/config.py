"""Scenario configuration: YAML loading, validation with field-precise
errors, defaults, and the figure presets."""

import copy
import io
import math
import numbers
from dataclasses import dataclass, field

import yaml

from ..exceptions import ConfigError, GeometryError
from ..geometry import LensDesign

__all__ = [
    "EXPERIMENTS",
    "PRESETS",
    "ScenarioConfig",
    "validate_and_echo",
    "load_config",
    "config_from_dict",
    "dump_config",
    "preset",
]

EXPERIMENTS = ("response-profile", "window-sweep", "peb-map", "localize-mc", "sumrate-sweep")
SCHEMES = ("LENS-MMSE", "LENS-MRC", "ULA-MMSE", "ULA-MRC", "ULA-GS-MMSE")

_LENS_DEFAULTS = {
    "design": "design2",
    "electrical_aperture": 100.0,
    "focal_length": 5.0,
    "source_focal_distance": 5.0,
    "wavelength": 0.01,
}

_PARAM_DEFAULTS = {
    "response-profile": {
        "apertures": [100.0],
        "designs": None,  # None keeps lens.design
        "d": 50.0,
        "phis": [0.0],
        "n_points": 801,
        "oracle": True,
        "oracle_rel_tol": 1e-8,
    },
    "window-sweep": {
        "apertures": [100.0, 200.0],
        "d": 50.0,
        "phis": [0.0],
        "threshold_db": -10.0,
    },
    "peb-map": {
        "mode": "d-phi",
        "d_values": [10.0, 18.0, 30.0, 50.0],
        "phi_values": [0.0, 0.5, 1.0],
        "aperture_values": [0.5, 1.0, 2.0],
        "f0_values": [5.0],
        "d": 18.0,
        "phi": 0.0,
        "snr_db": 20.0,
        "oracle": False,
    },
    "localize-mc": {
        "paths": [{"d": 16.8837, "phi": 0.0693, "g_re": 1.0, "g_im": 0.0}],
        "snr_db": [0.0, 10.0, 20.0, 30.0, 40.0],
        "estimator": {},
    },
    "sumrate-sweep": {
        "axis": "snr",
        "values": [0.0, 10.0, 20.0],
        "users": 5,
        "m_rf": 25,
        "paths_per_user": 2,
        "snr_db": 10.0,
        "schemes": list(SCHEMES),
        "estimated_csi": False,
        "d_range": [20.0, 320.0],
        "phi_max": math.pi / 5,
        "codebook_size": 1024,
        "phase_bits": 10,
    },
}

_ESTIMATOR_KEYS = {"delta_d", "rel_delta_d", "delta_phi", "N_d", "N_phi", "newton_iters",
                   "cyclic_rounds", "window_threshold_db", "coarse_distance"}


def _lens(D, F, F0, design="design2", lam=0.01):
    return {"design": design, "electrical_aperture": D, "focal_length": F,
            "source_focal_distance": F0, "wavelength": lam}


PRESETS = {
    "fig3": {
        "experiment": "response-profile",
        "lens": _lens(100.0, 5.0, 15.0),
        "params": {"apertures": [5.0, 10.0, 100.0, 200.0], "d": 50.0, "phis": [0.0],
                   "oracle": False},
    },
    "fig3-window": {
        "experiment": "window-sweep",
        "lens": _lens(100.0, 5.0, 15.0),
        "params": {"apertures": [100.0, 200.0], "d": 50.0, "phis": [0.0]},
    },
    "fig4": {
        "experiment": "response-profile",
        "lens": _lens(100.0, 5.0, 5.0),
        "params": {"apertures": [100.0], "designs": ["design1", "design2"], "d": 7.0,
                   "phis": [math.radians(a) for a in (-36, -20, 0, 20, 36)],
                   "oracle": True},
    },
    "fig5a": {
        "experiment": "peb-map",
        "lens": _lens(100.0, 5.0, 5.0),
        "params": {"mode": "d-phi", "d_values": [6.0, 10.0, 18.0, 30.0, 50.0],
                   "phi_values": [-1.2, -0.6, 0.0, 0.6, 1.2], "snr_db": 20.0},
    },
    "fig5b": {
        "experiment": "peb-map",
        "lens": _lens(100.0, 5.0, 5.0),
        "params": {"mode": "aperture-f0", "aperture_values": [0.5, 1.0, 2.0, 3.0],
                   "f0_values": [2.0, 5.0, 10.0, 15.0], "d": 18.0, "phi": 0.0,
                   "snr_db": 20.0},
    },
    "fig6-l1": {
        "experiment": "localize-mc",
        "trials": 100,
        "lens": _lens(100.0, 5.0, 5.0),
        "params": {"paths": [{"d": 16.8837, "phi": 0.0693, "g_re": 1.0, "g_im": 0.0}],
                   "snr_db": [0.0, 10.0, 20.0, 30.0, 40.0]},
    },
    "fig6-l2": {
        "experiment": "localize-mc",
        "trials": 100,
        "lens": _lens(100.0, 5.0, 5.0),
        # gains are not given with the figure; these are stand-ins
        "params": {"paths": [{"d": 12.8657, "phi": -0.1935, "g_re": 1.0, "g_im": 0.0},
                             {"d": 14.4962, "phi": 0.1897, "g_re": 0.4, "g_im": 0.6928}],
                   "snr_db": [0.0, 10.0, 20.0, 30.0, 40.0]},
    },
    "fig7a": {
        "experiment": "sumrate-sweep",
        "trials": 100,
        "lens": _lens(100.0, 5.0, 15.0),
        "params": {"axis": "snr", "values": [-10.0, 0.0, 10.0, 20.0, 30.0], "users": 1,
                   "m_rf": 5, "paths_per_user": 2},
    },
    "fig7b": {
        "experiment": "sumrate-sweep",
        "trials": 100,
        "lens": _lens(100.0, 5.0, 15.0),
        "params": {"axis": "snr", "values": [-10.0, 0.0, 10.0, 20.0, 30.0], "users": 5,
                   "m_rf": 25, "paths_per_user": 2},
    },
    "fig8": {
        "experiment": "sumrate-sweep",
        "trials": 200,
        "lens": _lens(100.0, 5.0, 15.0),
        "params": {"axis": "snr", "values": [10.0], "users": 5, "m_rf": 25,
                   "paths_per_user": 2},
    },
    "fig9": {
        "experiment": "sumrate-sweep",
        "trials": 100,
        "lens": _lens(100.0, 5.0, 15.0),
        "params": {"axis": "m_rf", "values": [1, 5, 10, 15, 25, 45, 65], "users": 1,
                   "snr_db": 10.0, "paths_per_user": 2},
    },
    "fig9-multi": {
        "experiment": "sumrate-sweep",
        "trials": 100,
        "lens": _lens(100.0, 5.0, 15.0),
        "params": {"axis": "m_rf", "values": [5, 15, 25, 45, 65], "users": 5,
                   "snr_db": 10.0, "paths_per_user": 2},
    },
    "fig9-users": {
        "experiment": "sumrate-sweep",
        "trials": 100,
        "lens": _lens(100.0, 5.0, 15.0),
        "params": {"axis": "k", "values": [1, 5, 10, 15, 20], "m_rf": 20,
                   "snr_db": 10.0, "paths_per_user": 2},
    },
    "fig10": {
        "experiment": "sumrate-sweep",
        "trials": 100,
        "lens": _lens(100.0, 5.0, 15.0),
        "params": {"axis": "aperture", "values": [20.0, 40.0, 60.0, 80.0, 120.0, 160.0],
                   "users": 5, "m_rf": 5, "snr_db": 10.0, "paths_per_user": 2,
                   "schemes": ["LENS-MMSE", "LENS-MRC", "ULA-MMSE", "ULA-MRC"]},
    },
}


@dataclass
class ScenarioConfig:
    experiment: str
    lens: dict
    params: dict
    seed: int = 0
    trials: int = 100
    preset: str = None
    out: str = None
    extra: dict = field(default_factory=dict)

    def design(self, electrical_aperture=None, variant=None, source_focal_distance=None):
        """Build the ``LensDesign``, optionally overriding aperture/variant/F0."""
        lam = self.lens["wavelength"]
        De = self.lens["electrical_aperture"] if electrical_aperture is None else electrical_aperture
        variant = variant or self.lens["design"]
        F0 = self.lens["source_focal_distance"] if source_focal_distance is None \
            else source_focal_distance
        return LensDesign(variant, De * lam, self.lens["focal_length"], lam,
                          F0 if variant == "design2" else None)

    def to_dict(self):
        out = {"experiment": self.experiment, "seed": self.seed, "trials": self.trials,
               "lens": copy.deepcopy(self.lens), "params": copy.deepcopy(self.params)}
        if self.preset:
            out["preset"] = self.preset
        return out


def _number(value, where, positive=False, integer=False, allow_none=False):
    if value is None and allow_none:
        return None
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise ConfigError(where, f"expected a number, got {value!r}")
    if integer:
        if int(value) != value:
            raise ConfigError(where, f"expected an integer, got {value!r}")
        value = int(value)
    else:
        value = float(value)
    if not math.isfinite(value):
        raise ConfigError(where, "must be finite")
    if positive and value <= 0:
        raise ConfigError(where, f"must be positive, got {value!r}")
    return value


def _number_list(value, where, **kw):
    if not isinstance(value, (list, tuple)) or not value:
        raise ConfigError(where, "expected a nonempty list")
    return [_number(v, f"{where}[{i}]", **kw) for i, v in enumerate(value)]


def _angle(value, where):
    value = _number(value, where)
    if abs(value) >= math.pi / 2:
        raise ConfigError(where, "angle must lie in (-pi/2, pi/2) rad")
    return value


def _validate_lens(raw):
    if not isinstance(raw, dict):
        raise ConfigError("lens", "expected a mapping")
    unknown = set(raw) - set(_LENS_DEFAULTS)
    if unknown:
        raise ConfigError(f"lens.{sorted(unknown)[0]}", "unknown field")
    for key in ("wavelength", "electrical_aperture", "focal_length"):
        if key not in raw:
            raise ConfigError(f"lens.{key}", "missing required field")
    lens = dict(_LENS_DEFAULTS)
    lens.update(raw)
    if lens["design"] not in ("design1", "design2"):
        raise ConfigError("lens.design", "must be 'design1' or 'design2'")
    for key in ("electrical_aperture", "focal_length", "wavelength", "source_focal_distance"):
        lens[key] = _number(lens[key], f"lens.{key}", positive=True)
    if lens["electrical_aperture"] < 1:
        raise ConfigError("lens.electrical_aperture", "must be >= 1")
    return lens


def _validate_params(kind, raw):
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("params", "expected a mapping")
    defaults = _PARAM_DEFAULTS[kind]
    unknown = set(raw) - set(defaults)
    if unknown:
        raise ConfigError(f"params.{sorted(unknown)[0]}", f"unknown field for {kind}")
    p = copy.deepcopy(defaults)
    p.update(copy.deepcopy(raw))
    if kind in ("response-profile", "window-sweep"):
        p["apertures"] = _number_list(p["apertures"], "params.apertures", positive=True)
        p["d"] = _number(p["d"], "params.d", positive=True)
        p["phis"] = [_angle(v, f"params.phis[{i}]") for i, v in enumerate(p["phis"])]
    if kind == "response-profile":
        p["n_points"] = _number(p["n_points"], "params.n_points", positive=True, integer=True)
        if p["designs"] is not None:
            if not isinstance(p["designs"], list) or not p["designs"] or any(
                    v not in ("design1", "design2") for v in p["designs"]):
                raise ConfigError("params.designs", "expected a list of design1/design2")
        if not isinstance(p["oracle"], bool):
            raise ConfigError("params.oracle", "expected true/false")
        p["oracle_rel_tol"] = _number(p["oracle_rel_tol"], "params.oracle_rel_tol",
                                      positive=True)
        if p["oracle_rel_tol"] < 1e-12:
            raise ConfigError("params.oracle_rel_tol", "must be >= 1e-12")
    elif kind == "window-sweep":
        p["threshold_db"] = _number(p["threshold_db"], "params.threshold_db")
        if p["threshold_db"] >= 0:
            raise ConfigError("params.threshold_db", "must be negative")
    elif kind == "peb-map":
        if p["mode"] not in ("d-phi", "aperture-f0"):
            raise ConfigError("params.mode", "must be 'd-phi' or 'aperture-f0'")
        p["d_values"] = _number_list(p["d_values"], "params.d_values", positive=True)
        p["phi_values"] = [_angle(v, f"params.phi_values[{i}]")
                           for i, v in enumerate(p["phi_values"])]
        p["aperture_values"] = _number_list(p["aperture_values"], "params.aperture_values",
                                            positive=True)
        p["f0_values"] = _number_list(p["f0_values"], "params.f0_values", positive=True)
        p["d"] = _number(p["d"], "params.d", positive=True)
        p["phi"] = _angle(p["phi"], "params.phi")
        p["snr_db"] = _number(p["snr_db"], "params.snr_db")
        if not isinstance(p["oracle"], bool):
            raise ConfigError("params.oracle", "expected true/false")
    elif kind == "localize-mc":
        if not isinstance(p["paths"], list) or not p["paths"]:
            raise ConfigError("params.paths", "expected a nonempty list of paths")
        paths = []
        for i, path in enumerate(p["paths"]):
            where = f"params.paths[{i}]"
            if not isinstance(path, dict) or "d" not in path or "phi" not in path:
                raise ConfigError(where, "each path needs d and phi")
            paths.append({"d": _number(path["d"], f"{where}.d", positive=True),
                          "phi": _angle(path["phi"], f"{where}.phi"),
                          "g_re": _number(path.get("g_re", 1.0), f"{where}.g_re"),
                          "g_im": _number(path.get("g_im", 0.0), f"{where}.g_im")})
        p["paths"] = paths
        p["snr_db"] = _number_list(p["snr_db"], "params.snr_db")
        est = p["estimator"] or {}
        if not isinstance(est, dict):
            raise ConfigError("params.estimator", "expected a mapping")
        bad = set(est) - _ESTIMATOR_KEYS
        if bad:
            raise ConfigError(f"params.estimator.{sorted(bad)[0]}", "unknown estimator option")
        p["estimator"] = est
    elif kind == "sumrate-sweep":
        if p["axis"] not in ("snr", "m_rf", "k", "aperture"):
            raise ConfigError("params.axis", "must be one of snr, m_rf, k, aperture")
        integer = p["axis"] in ("m_rf", "k")
        p["values"] = _number_list(p["values"], "params.values", integer=integer,
                                   positive=p["axis"] != "snr")
        p["users"] = _number(p["users"], "params.users", positive=True, integer=True)
        p["m_rf"] = _number(p["m_rf"], "params.m_rf", positive=True, integer=True)
        p["paths_per_user"] = _number(p["paths_per_user"], "params.paths_per_user",
                                      positive=True, integer=True)
        p["snr_db"] = _number(p["snr_db"], "params.snr_db")
        if not isinstance(p["schemes"], list) or not p["schemes"]:
            raise ConfigError("params.schemes", "expected a nonempty list")
        for i, s in enumerate(p["schemes"]):
            if s not in SCHEMES:
                raise ConfigError(f"params.schemes[{i}]", f"unknown scheme {s!r}")
        if not isinstance(p["estimated_csi"], bool):
            raise ConfigError("params.estimated_csi", "expected true/false")
        p["d_range"] = _number_list(p["d_range"], "params.d_range", positive=True)
        if len(p["d_range"]) != 2 or p["d_range"][0] >= p["d_range"][1]:
            raise ConfigError("params.d_range", "expected [low, high] with low < high")
        p["phi_max"] = _angle(p["phi_max"], "params.phi_max")
        p["codebook_size"] = _number(p["codebook_size"], "params.codebook_size",
                                     positive=True, integer=True)
        p["phase_bits"] = _number(p["phase_bits"], "params.phase_bits", positive=True,
                                  integer=True)
    return p


def config_from_dict(raw):
    """Validate a raw mapping (as parsed from YAML) into a ``ScenarioConfig``."""
    if not isinstance(raw, dict):
        raise ConfigError("", "configuration must be a mapping")
    raw = copy.deepcopy(raw)
    name = raw.pop("preset", None)
    if name is not None:
        base = preset_dict(name)
        for key, value in raw.items():
            if key in ("lens", "params") and isinstance(value, dict):
                base[key] = {**base.get(key, {}), **value}
            else:
                base[key] = value
        raw = base
    allowed = {"experiment", "seed", "trials", "lens", "params"}
    unknown = set(raw) - allowed
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown top-level field")
    if "experiment" not in raw:
        raise ConfigError("experiment", "missing required field")
    kind = raw["experiment"]
    if kind not in EXPERIMENTS:
        raise ConfigError("experiment", f"must be one of {', '.join(EXPERIMENTS)}")
    if "lens" not in raw:
        raise ConfigError("lens", "missing required section")
    lens = _validate_lens(raw["lens"])
    params = _validate_params(kind, raw.get("params"))
    seed = _number(raw.get("seed", 0), "seed", integer=True)
    if seed < 0:
        raise ConfigError("seed", "must be nonnegative")
    trials = _number(raw.get("trials", 100), "trials", positive=True, integer=True)
    cfg = ScenarioConfig(kind, lens, params, seed, trials, name)
    try:
        cfg.design()
    except GeometryError as exc:
        raise ConfigError("lens", str(exc)) from exc
    return cfg


def preset_dict(name):
    if name not in PRESETS:
        raise ConfigError("preset", f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return copy.deepcopy(PRESETS[name])


def preset(name, **overrides):
    raw = preset_dict(name)
    raw.update(overrides)
    cfg = config_from_dict(raw)
    cfg.preset = name
    return cfg


def _mark_problem(text, exc):
    mark = getattr(exc, "problem_mark", None)
    if mark is None:
        return str(exc)
    return f"line {mark.line + 1}, column {mark.column + 1}: {getattr(exc, 'problem', exc)}"


def _metadata_config(text):
    """Extract the config block from a result CSV's comment header."""
    lines = []
    inside = False
    for line in text.splitlines():
        if not line.startswith("#"):
            break
        body = line[2:] if line.startswith("# ") else line[1:]
        if body.rstrip() == "config:":
            inside = True
            continue
        if inside:
            if body.startswith("  "):
                lines.append(body[2:])
            else:
                break
    if not lines:
        raise ConfigError("config", "no config block found in table metadata")
    return "\n".join(lines)


def load_config(path):
    """Read a YAML scenario file, or the metadata header of a result CSV."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from exc
    if text.startswith("#"):
        text = _metadata_config(text)
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("config", _mark_problem(text, exc)) from exc
    return config_from_dict(raw)


def validate_and_echo(path):
    """Parse and validate ``path``; the returned config echoes into output metadata."""
    return load_config(path)


def dump_config(cfg):
    """YAML text for a config; ``config_from_dict(yaml.safe_load(...))`` round-trips."""
    buf = io.StringIO()
    yaml.safe_dump(cfg.to_dict(), buf, sort_keys=True, default_flow_style=False)
    return buf.getvalue()
