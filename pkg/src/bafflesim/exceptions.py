class BaffleError(Exception):
    """Base class for errors raised by bafflesim."""


class ConfigurationError(BaffleError, ValueError):
    """Invalid architecture, experiment or defense configuration."""


class InputError(BaffleError, ValueError):
    """Invalid data passed to an operation (empty set, shape mismatch...)."""
