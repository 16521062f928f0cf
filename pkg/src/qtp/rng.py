"""Seeded random streams.

Every random draw in the package comes from a numpy ``Generator`` backed by
PCG64. Substreams are derived from the master seed with ``SeedSequence``
spawn keys, so a stream is identified by ``(seed, key)`` alone and does not
depend on how many draws other streams made.
"""

from __future__ import annotations

import hashlib

import numpy as np

RNG_ALGORITHM = "numpy.PCG64/SeedSequence"


def _key_part(part: int | str) -> int:
    if isinstance(part, int) and part >= 0:
        return part
    digest = hashlib.sha256(str(part).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def substream(seed: int, *key: int | str) -> np.random.Generator:
    """Independent generator for ``key`` under master ``seed``.

    String parts are hashed to 64-bit integers so keys can be human readable,
    e.g. ``substream(7, "sweep", "qubit", 3)``.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(_key_part(p) for p in key))
    return np.random.Generator(np.random.PCG64(ss))


def split(rng: np.random.Generator, n: int) -> list[np.random.Generator]:
    """n child generators of ``rng``; deterministic in the parent's state."""
    return list(rng.spawn(n))
