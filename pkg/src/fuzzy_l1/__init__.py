"""Fuzzy-scheduled L1 adaptive control of a twin rotor MIMO model."""

from .config import ConfigError, load, load_bundled
from .sim import Trace, objectives, rms_error, run_scenario

__version__ = "0.1.0"

__all__ = ["ConfigError", "Trace", "load", "load_bundled", "objectives", "rms_error", "run_scenario"]
