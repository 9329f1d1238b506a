"""Agent-based simulator of retail payment outages and the withdrawal pressure they leave behind."""

from .config import ConfigError, SimulationConfig, load_config
from .engine import BatchRunError, run, run_batch, run_paired

__all__ = [
    "BatchRunError",
    "ConfigError",
    "SimulationConfig",
    "load_config",
    "run",
    "run_batch",
    "run_paired",
]
