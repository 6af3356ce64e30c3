"""Simulation and estimation toolkit for weak-value-amplified double-slit delay metrology."""

__version__ = "0.1.0"

from .config import OpticalSetup, load_config
from .simulation import Simulator

__all__ = ["OpticalSetup", "Simulator", "load_config", "__version__"]
