"""Federated learning under model-replacement backdoors, with a client-feedback defense."""
from .exceptions import BaffleError, ConfigurationError, InputError
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "BaffleError", "ConfigurationError", "InputError", "__version__"]
