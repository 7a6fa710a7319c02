"""Seeded random streams.

Every stochastic routine in the package draws from numpy's PCG64 bit
generator (64-bit output, documented in ``numpy.random.PCG64``). Streams for
per-instance work are derived from ``(seed, instance_index)`` through
``SeedSequence`` so results do not depend on processing order.
"""

from __future__ import annotations

import numpy as np


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))


def instance_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for one instance of a batch job."""
    ss = np.random.SeedSequence([int(seed), int(index)])
    return np.random.Generator(np.random.PCG64(ss))
