"""Reproducible random streams for parallel sweeps.

Every task (a learner run, a sampled strategy, a sweep cell) gets its own
counter-based Philox stream derived from a 64-bit master seed and the task's
index path.  Streams depend only on (master_seed, indices), never on execution
order or thread count, so sweep output is bit-reproducible under any degree of
parallelism.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def normalize_seed(seed) -> int:
    """Coerce a user-supplied seed to a 64-bit unsigned integer."""
    return int(seed) & _MASK64


def stream(master_seed: int, *indices: int) -> np.random.Generator:
    """Philox generator for the task addressed by ``indices`` under ``master_seed``.

    The same (seed, indices) pair always yields the same stream; distinct index
    paths yield statistically independent streams.
    """
    ss = np.random.SeedSequence(entropy=normalize_seed(master_seed),
                                spawn_key=tuple(int(i) for i in indices))
    return np.random.Generator(np.random.Philox(ss))
