"""Scenario configuration and generator factories."""
from .config import LabConfig, LabDefaults, load_config, parse_config
from .factories import build_scenario, gaussian_density, witness_functions

__all__ = ["LabConfig", "LabDefaults", "build_scenario", "gaussian_density", "load_config",
           "parse_config", "witness_functions"]
