"""Counting-functional laboratory for mean-field limits of bosons on a periodic lattice."""
from .errors import CapacityError, ConfigError, HartreeLabError, InstabilityError, InvalidArgumentError

__all__ = ["CapacityError", "ConfigError", "HartreeLabError", "InstabilityError", "InvalidArgumentError"]
__version__ = "0.1.0"
