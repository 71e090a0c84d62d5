"""Seeded random number streams for reproducible simulation.

All stochastic routines in this package derive their generators through
:func:`substream`, so a (seed, key...) pair always maps to the same PCG64
stream regardless of how many other streams were consumed elsewhere.
"""
from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def substream(seed: int, *keys: int) -> np.random.Generator:
    """Return the PCG64 generator for ``seed`` refined by integer ``keys``.

    Seeds are folded to 64 bits, so negative seeds are accepted and map
    deterministically onto the unsigned range.
    """
    entropy = [int(seed) & _MASK64] + [int(k) & _MASK64 for k in keys]
    return np.random.default_rng(np.random.SeedSequence(entropy))
