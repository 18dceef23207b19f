"""Deterministic RNG derivation.

Every stochastic operation in the package draws from a generator derived
from (master_seed, stream, *path), so per-device and per-trial work can be
reordered or parallelized without changing results.
"""

import numpy as np

# Stream tags keep independently derived generators from colliding.
STREAM_DATASET = 1
STREAM_PARTITION = 2
STREAM_BATCH = 3
STREAM_ENCODE = 4
STREAM_CHANNEL = 5
STREAM_NOISE = 6
STREAM_INIT = 7

_MASK64 = (1 << 64) - 1


def derive_rng(master_seed: int, *path: int) -> np.random.Generator:
    """Generator seeded from (master_seed, *path); same path, same stream."""
    entropy = [int(master_seed) & _MASK64] + [int(p) & _MASK64 for p in path]
    return np.random.default_rng(np.random.SeedSequence(entropy))
