"""Reproducible experiment runners behind the ``exlens`` command line."""

from .config import (EXPERIMENTS, PRESETS, ScenarioConfig, config_from_dict, dump_config,
                     load_config, preset, validate_and_echo)
from .runners import (RUNNERS, run_experiment, run_localize_mc, run_peb_map,
                      run_response_profile, run_sumrate_sweep, run_window_sweep,
                      sumrate_draws)
from .table import ResultTable, read_table

__all__ = [
    "EXPERIMENTS", "PRESETS", "ScenarioConfig", "config_from_dict", "dump_config",
    "load_config", "preset", "validate_and_echo", "RUNNERS", "run_experiment",
    "run_response_profile", "run_window_sweep", "run_peb_map", "run_localize_mc",
    "run_sumrate_sweep", "sumrate_draws", "ResultTable", "read_table",
]
