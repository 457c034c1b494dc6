"""Deterministic seed derivation.

All randomness in the package flows from 64-bit integer seeds.  Derived
seeds are produced with numpy's SeedSequence, whose hashing is stable
across platforms and numpy versions, so a (master_seed, key path) pair
always yields the same child seed.
"""

import numpy as np


def derive_seed(master_seed: int, *key: int) -> int:
    """Derive a child 64-bit seed from a master seed and an integer key path."""
    ss = np.random.SeedSequence(master_seed, spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0])
