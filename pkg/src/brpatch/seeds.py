"""Deterministic RNG derivation.

Every source of randomness in the package is a numpy Generator derived from
an integer master seed plus an integer key path, so that parallel and serial
execution of per-image / per-element work draw identical values.
"""

from __future__ import annotations

import numpy as np

# Key-path namespaces. Kept distinct so unrelated draws never share a stream.
NS_INIT = 0
NS_SHUFFLE = 1
NS_TRANSFORM = 2
NS_EVAL = 3
NS_VAL = 4
NS_DATASET = 5
NS_DRIFT = 6


def derive_rng(master_seed: int, *path: int) -> np.random.Generator:
    """Generator for (master_seed, path). Same arguments, same stream."""
    ss = np.random.SeedSequence(int(master_seed) & (2**64 - 1), spawn_key=tuple(int(p) for p in path))
    return np.random.default_rng(ss)


def derive_seed(master_seed: int, *path: int) -> int:
    """A single derived 63-bit integer seed (e.g. to hand to evaluate_asr)."""
    ss = np.random.SeedSequence(int(master_seed) & (2**64 - 1), spawn_key=tuple(int(p) for p in path))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> 1)
