"""Counter-based random streams.

``stream(seed, index, domain)`` always yields the same generator for the same
triple, and generators for different ``index`` values are independent. Work
items can therefore be scheduled in any order, on any number of workers,
without changing results.
"""

import hashlib

import numpy as np
from numpy.random import Generator, Philox

_COUNTER_SHIFT = 128


def _key(seed, domain):
    h = hashlib.blake2b(f"{int(seed)}|{domain}".encode(), digest_size=16)
    return int.from_bytes(h.digest(), "little")


def stream(seed, index=0, domain=""):
    """Return the generator for trial ``index`` under ``(seed, domain)``.

    The Philox key is derived from the seed and domain label; the trial index
    occupies the upper 128 bits of the 256-bit counter, leaving each stream
    2**128 blocks before it could touch its neighbour.
    """
    if index < 0:
        raise ValueError("stream index must be nonnegative")
    return Generator(Philox(key=_key(seed, domain), counter=int(index) << _COUNTER_SHIFT))


def rademacher(rng, size):
    return np.where(rng.random(size) < 0.5, -1.0, 1.0)
