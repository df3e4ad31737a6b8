"""Near-field channel modelling, localization and multi-user evaluation for
extremely large lens antenna arrays."""

__version__ = "0.1.0"

from .channel import PathParams, UserChannel, build_channel, synthesize_received
from .estimator import EstimatorConfig, ExLensLocalizer, estimate_paths
from .exceptions import (ConfigError, ExLensError, FarFieldDegenerateError, FarFieldWarning,
                         GeometryError, NoWindowFoundError, NumericalError, QuadratureError,
                         SingularMatrixError)
from .fisher import crlb_components, fim, fisher_analysis, peb
from .geometry import ArrayGeometry, LensDesign, SourcePoint, window_edges
from .multiuser import PowerAntennaSelector, gs_analog_combiner, select_antennas_power, sum_rate
from .response import response_closed_form, response_integral_oracle, response_vector

__all__ = [
    "__version__",
    "ArrayGeometry", "LensDesign", "SourcePoint", "window_edges",
    "response_closed_form", "response_integral_oracle", "response_vector",
    "PathParams", "UserChannel", "build_channel", "synthesize_received",
    "fim", "crlb_components", "peb", "fisher_analysis",
    "EstimatorConfig", "ExLensLocalizer", "estimate_paths",
    "PowerAntennaSelector", "select_antennas_power", "gs_analog_combiner", "sum_rate",
    "ExLensError", "NumericalError", "QuadratureError", "SingularMatrixError",
    "GeometryError", "NoWindowFoundError", "FarFieldDegenerateError", "ConfigError",
    "FarFieldWarning",
]
