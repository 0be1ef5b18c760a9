"""Online estimation of PEMFC polarization-curve parameters from current/voltage streams."""

from .errors import ConfigError, DivergenceError, DomainError, ExcitationError
from .estimators import GradientEstimator, LsdEstimator, batch_ls
from .harness import RunConfig, RunReport, compare_curves, load_config, run

__all__ = [
    "ConfigError", "DivergenceError", "DomainError", "ExcitationError",
    "GradientEstimator", "LsdEstimator", "batch_ls",
    "RunConfig", "RunReport", "compare_curves", "load_config", "run",
]
__version__ = "0.1.0"
