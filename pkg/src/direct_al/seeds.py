"""Keyed RNG streams.

Every random decision in an experiment is drawn from a generator keyed by
(master seed, purpose tag, ...context ints).  Keyed streams make each
decision a pure function of the label history, so a run can be replayed
from a journal without serializing RNG state.
"""

from __future__ import annotations

import numpy as np

# Purpose tags. Append only; renumbering breaks replay of existing journals.
NOISE = 1
SPLIT = 2
SEED_BATCH = 3
PHASE1_PERM = 4
PHASE2_PERM = 5
VREDUCE = 6
RANDOM_STRATEGY = 7
POOL_SHUFFLE = 8
MC_TRIAL = 9
VERIFY_LEMMA = 10
VERIFY_GRAD = 11


def stream(master_seed: int, *key: int) -> np.random.Generator:
    """Return a generator for the given (seed, tag, ...) key."""
    if master_seed < 0:
        raise ValueError(f"seed must be non-negative, got {master_seed}")
    return np.random.default_rng([master_seed, *key])
