"""Exception hierarchy shared by all modules."""


class HardcoreError(Exception):
    """Base class for errors raised by this package."""


class InvalidArgument(HardcoreError, ValueError):
    pass


class InvalidConfiguration(HardcoreError, ValueError):
    """Configuration cannot be processed (too few grains, coincident germs, NaNs)."""


class InvalidRegime(HardcoreError, ValueError):
    """Input violates the equal-birth / bounded-shape regime of the CLT analysis."""


class ConfigError(HardcoreError, ValueError):
    """Bad scenario file or command line override."""
