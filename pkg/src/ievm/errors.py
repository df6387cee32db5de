"""Exception types raised by the library."""


class EVMError(ValueError):
    """Base class for all library errors (precondition violations included)."""


class DataFormatError(EVMError):
    """Malformed feature file, model file, or stream manifest."""


class ConfigError(EVMError):
    """Invalid configuration value or unknown configuration key."""
