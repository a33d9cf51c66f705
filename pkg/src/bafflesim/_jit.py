"""Numba switch.

Set ``BAFFLESIM_DISABLE_JIT=1`` to force the pure-numpy kernels. When numba
cannot be imported the numpy path is used as well.
"""
import logging
import os

logger = logging.getLogger(__name__)

_FLAG = "BAFFLESIM_DISABLE_JIT"

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False
    logger.warning("numba not importable, falling back to numpy kernels")


def jit_disabled():
    return os.environ.get(_FLAG, "").strip().lower() in ("1", "true", "yes", "on")


USE_JIT = HAVE_NUMBA and not jit_disabled()


def njit(func=None, **kwargs):
    """``numba.njit(cache=True)`` when numba is present, identity otherwise."""
    kwargs.setdefault("cache", True)

    def wrap(f):
        if not HAVE_NUMBA:
            return f
        return numba.njit(**kwargs)(f)

    return wrap if func is None else wrap(func)
