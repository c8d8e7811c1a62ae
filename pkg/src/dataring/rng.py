"""Seed handling.

Every randomized operation takes ``seed``: an int, a ``numpy.random.Generator``
or ``None``.  Ints give reproducible runs.  ``None`` draws group scalars from
``secrets`` and everything else from an OS-seeded generator.

Child seeds are split from a master seed with :func:`derive_seed`: the first
8 bytes (big-endian) of BLAKE2b over ``"master/label/label/..."``.
"""

import hashlib
import secrets

import numpy as np


def as_rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def derive_seed(master, *labels):
    path = "/".join(str(part) for part in (master, *labels))
    return int.from_bytes(hashlib.blake2b(path.encode(), digest_size=8).digest(), "big")


def random_scalar(order, rng=None):
    """Uniform scalar in [1, order-1]."""
    if rng is None:
        return secrets.randbelow(order - 1) + 1
    # 128 spare bits make the modulo bias negligible
    raw = int.from_bytes(rng.bytes((order.bit_length() + 7) // 8 + 16), "big")
    return raw % (order - 1) + 1


def crypto_rng(seed):
    """Generator for group scalars, or None to keep them on ``secrets``."""
    return None if seed is None else as_rng(seed)
