from .config import ExperimentConfig, load_config
from .experiments import ExperimentReport, emit_power_curve, run_synthetic
from .realdata import RealDataConfig, run_realdata

__all__ = [
    "ExperimentConfig",
    "ExperimentReport",
    "RealDataConfig",
    "emit_power_curve",
    "load_config",
    "run_realdata",
    "run_synthetic",
]
