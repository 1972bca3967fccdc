"""ROI-aware mapping of video packets onto 802.11p EDCA access categories."""

from .engine import Engine, RngStream
from .experiment import run_experiment, simulate
from .mapper import MappingConfig, compute_p_new, map_packet
from .scenario import Scenario, load_scenario

__version__ = "0.1.0"

__all__ = ["Engine", "RngStream", "MappingConfig", "Scenario", "compute_p_new", "load_scenario",
           "map_packet", "run_experiment", "simulate"]
