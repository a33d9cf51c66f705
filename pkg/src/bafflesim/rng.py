"""Named, derivable random streams.

Every consumer of randomness asks for a stream keyed by the master seed plus
a tuple of names/integers, e.g. ``stream(seed, "train", round_, client)``.
Streams are independent of call order, so extra instrumentation never shifts
the numbers drawn elsewhere.
"""
import zlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _key_word(key):
    if isinstance(key, str):
        return zlib.crc32(key.encode("utf-8"))
    if isinstance(key, (bool, np.bool_)):
        return int(key)
    if isinstance(key, (int, np.integer)):
        return int(key) & _MASK64
    raise TypeError(f"stream keys must be str or int, got {type(key).__name__}")


def seed_sequence(seed, *keys):
    return np.random.SeedSequence([int(seed) & _MASK64, *(_key_word(k) for k in keys)])


def stream(seed, *keys):
    """Return a fresh ``numpy.random.Generator`` for ``(seed, *keys)``."""
    return np.random.Generator(np.random.PCG64(seed_sequence(seed, *keys)))


def derive_seed(seed, *keys):
    """A 63-bit integer seed derived from ``(seed, *keys)``."""
    return int(seed_sequence(seed, *keys).generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def repetition_seed(master_seed, repetition):
    """Seed for repetition ``repetition`` of an experiment.

    SplitMix64 finalizer applied to ``master_seed + repetition``; documented
    so that runs can be reproduced outside this package.
    """
    z = (int(master_seed) + int(repetition) + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    z ^= z >> 31
    return z >> 1
