from .config import ExperimentConfig, load_config, make_config, parse_config
from .figures import figure_suite
from .runner import ShotSample, run, shot_sample

__all__ = [
    "ExperimentConfig",
    "ShotSample",
    "figure_suite",
    "load_config",
    "make_config",
    "parse_config",
    "run",
    "shot_sample",
]
