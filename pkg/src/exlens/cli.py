"""``exlens`` command line: one subcommand per experiment family."""

import argparse
import sys
import time

from .exceptions import ConfigError
from .experiments.config import PRESETS, config_from_dict, load_config, preset_dict
from .experiments.runners import run_experiment

_COMMANDS = {
    "response-profile": "response magnitude across the focal arc",
    "window-sweep": "energy-focusing window edges versus aperture and angle",
    "peb-map": "position error bound over a parameter grid",
    "localize-mc": "Monte Carlo localization error versus SNR",
    "sumrate-sweep": "multi-user sum rate versus SNR, M_RF, K or aperture",
}


def build_parser():
    parser = argparse.ArgumentParser(prog="exlens", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in _COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="YAML scenario file, or a result CSV to rerun")
        p.add_argument("--preset", choices=sorted(k for k, v in PRESETS.items()
                                                  if v["experiment"] == name))
        p.add_argument("--seed", type=int, help="master seed (overrides the config)")
        p.add_argument("--trials", type=int, help="Monte Carlo trials (overrides the config)")
        p.add_argument("--out", help="output CSV path (default: stdout)")
        p.add_argument("--workers", type=int, default=1,
                       help="worker processes; results do not depend on this")
    return parser


def _resolve(args):
    if args.config and args.preset:
        raise ConfigError("preset", "give either --config or --preset, not both")
    if args.config:
        cfg = load_config(args.config)
    elif args.preset:
        raw = preset_dict(args.preset)
        cfg = config_from_dict(raw)
        cfg.preset = args.preset
    else:
        cfg = config_from_dict({"experiment": args.command,
                                "lens": {"electrical_aperture": 100.0, "focal_length": 5.0,
                                         "wavelength": 0.01}})
    if cfg.experiment != args.command:
        raise ConfigError("experiment", f"config is for {cfg.experiment!r}, "
                                        f"not {args.command!r}")
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("seed", "must be nonnegative")
        cfg.seed = args.seed
    if args.trials is not None:
        if args.trials < 1:
            raise ConfigError("trials", "must be positive")
        cfg.trials = args.trials
    return cfg


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _resolve(args)
    except ConfigError as exc:
        print(f"exlens: config error: {exc}", file=sys.stderr)
        return 2
    start = time.perf_counter()
    table = run_experiment(cfg, workers=args.workers)
    if args.out:
        table.write(args.out)
    else:
        try:
            table.to_csv(sys.stdout)
            sys.stdout.flush()
        except BrokenPipeError:
            # downstream reader (e.g. head) closed early
            sys.stdout = None
            return 0
    # wall time goes to stderr so that tables stay byte-identical across runs
    print(f"exlens: {cfg.experiment} done in {time.perf_counter() - start:.2f} s",
          file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
