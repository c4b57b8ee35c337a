"""Deterministic RNG derivation.

Every source of randomness in the toolkit is a `numpy.random.Generator`
derived from an integer seed plus a tuple of integer keys, so any record,
batch or repeat can be regenerated in isolation (and in parallel) without
sharing generator state.
"""
import numpy as np

# key-namespace constants, so independent consumers of the same seed never
# collide
RECORD = 0
SPLIT = 1
BATCH = 2
EVAL = 3
SCENE = 4
INIT = 5
ORDER = 6


def derive(seed, *keys):
    """SeedSequence for (seed, keys); stable across runs and platforms."""
    return np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in keys))


def rng_from(seed, *keys):
    return np.random.Generator(np.random.PCG64(derive(seed, *keys)))


def child_seed(seed, *keys):
    """Derived integer seed, for APIs that take a plain int."""
    return int(rng_from(seed, *keys).integers(2**63))
