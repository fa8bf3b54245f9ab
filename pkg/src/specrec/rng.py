"""Deterministic random streams for instance generation and solvers.

All randomness in this package is drawn from Philox4x64-10 counter-based
generators (numpy's ``np.random.Philox``).  A stream is addressed by a
64-bit user seed plus a (tag, index) pair packed into the second key word:

    key = [seed, tag << 32 | index]

Distinct (tag, index) pairs give statistically independent streams for the
same seed, so each generated object (support set, sign pattern, i-th basis
vector, rotation, ...) reads from its own stream and inserting a new object
never shifts the others.  The scheme is version 1; changing it would change
every fixture in the test suite.
"""

import numpy as np

# stream tags, one per generated object kind (version 1, frozen)
TAG_PSV_SUPPORT = 1
TAG_PSV_SIGNS = 2
TAG_PSV_BASIS_VEC = 3
TAG_PSV_ROTATION = 4
TAG_DECOMP_COMPONENTS = 5
TAG_SPIKE_DIRECTION = 6
TAG_SPIKE_NOISE = 7
TAG_POWER_START = 8
TAG_ATTEMPT_GAUSSIAN = 9
TAG_ATTEMPT_SEEDS = 10

_MASK64 = (1 << 64) - 1


def stream(seed: int, tag: int, index: int = 0) -> np.random.Generator:
    """Independent Philox stream for (seed, tag, index)."""
    if not 0 <= tag < (1 << 32):
        raise ValueError(f"tag out of range: {tag}")
    if not 0 <= index < (1 << 32):
        raise ValueError(f"index out of range: {index}")
    key = np.array([seed & _MASK64, (tag << 32) | index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def derive_seeds(seed: int, tag: int, count: int) -> np.ndarray:
    """Array of `count` sub-seeds drawn from the (seed, tag) stream."""
    return stream(seed, tag).integers(0, 1 << 63, size=count, dtype=np.uint64)
