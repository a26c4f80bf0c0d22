"""Seeded random streams.

All randomness comes from numpy's PCG64 bit generator. A master seed is
expanded into independent per-purpose streams with ``SeedSequence`` so that,
for example, adding a policy sample never shifts the SMOTE draws.
"""

import zlib

import numpy as np


def _purpose_key(purpose: str) -> int:
    return zlib.crc32(purpose.encode("utf-8"))


def stream(seed: int, purpose: str, *extra: int) -> np.random.Generator:
    """Return a PCG64 generator derived from ``seed`` for one named purpose."""
    ss = np.random.SeedSequence([int(seed), _purpose_key(purpose), *map(int, extra)])
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(seed: int, purpose: str, *extra: int) -> int:
    """A 32-bit integer seed derived the same way as :func:`stream`."""
    ss = np.random.SeedSequence([int(seed), _purpose_key(purpose), *map(int, extra)])
    return int(ss.generate_state(1, dtype=np.uint32)[0])
