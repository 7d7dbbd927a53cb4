"""Counter-based random streams.

Every sample owns a Philox stream keyed by ``(seed, stratum, index)``, so a
pool is reproducible bit-for-bit regardless of worker count or batch order.
"""

from __future__ import annotations

import numpy as np

# key spaces kept apart from sample indices
ACCEPT = 1 << 40
SCHEDULE = 1 << 41


def stream(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def sample_stream(seed: int, k: int, index: int) -> np.random.Generator:
    return stream(seed, k, index)


def acceptance_uniforms(seed: int, k: int, count: int) -> np.ndarray:
    """Uniforms used to accept pool records; a longer request extends a shorter one."""
    return stream(seed, ACCEPT, k).random(count)
