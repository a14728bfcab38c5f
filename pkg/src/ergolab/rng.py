"""Seeded, splittable random streams.

All randomness flows from a single integer seed through
:class:`numpy.random.SeedSequence`; child streams are spawned by index,
so a draw never depends on how work is scheduled across threads.
"""

import numpy as np


def make_rng(seed):
    """Counter-based (Philox) generator for ``seed``; generators pass through."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def spawn(rng, n):
    """``n`` independent child generators, deterministic given ``rng``'s seed."""
    return make_rng(rng).spawn(n)


def random_key(rng):
    """A uniform 64-bit key (used to label lazily generated symbol sequences)."""
    return int(make_rng(rng).integers(0, 2**64, dtype=np.uint64))
