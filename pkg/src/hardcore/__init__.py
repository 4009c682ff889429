"""Growth-maximal hard-core germ-grain models."""
from .errors import ConfigError, HardcoreError, InvalidArgument, InvalidConfiguration, InvalidRegime
from .geometry import Ball, PlacedBody, Polygon, contact_radius, regular_polygon, square
from .model import Configuration, Grain, GrownGrain, first_contact_time, stop_time_against_frozen
from .builder import HardCoreResult, build
from .oracle import simulate_growth

__version__ = "0.1.0"

__all__ = [
    "Ball", "Configuration", "ConfigError", "Grain", "GrownGrain", "HardCoreResult", "HardcoreError",
    "InvalidArgument", "InvalidConfiguration", "InvalidRegime", "PlacedBody", "Polygon", "build",
    "contact_radius", "first_contact_time", "regular_polygon", "simulate_growth", "square",
    "stop_time_against_frozen",
]
