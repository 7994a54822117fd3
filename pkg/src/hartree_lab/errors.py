"""Exception types shared across the package."""


class HartreeLabError(Exception):
    """Base class; carries a short machine-readable ``kind`` tag."""

    kind = "error"


class InvalidArgumentError(HartreeLabError, ValueError):
    kind = "invalid-argument"


class CapacityError(HartreeLabError):
    kind = "capacity"


class InstabilityError(HartreeLabError, RuntimeError):
    kind = "instability"


class ConfigError(HartreeLabError, ValueError):
    kind = "config"
