"""Seeded random streams.

Every stream is a Philox counter-based generator keyed by ``(seed, stream)``
through ``SeedSequence.spawn_key``, so worker ``k`` of a run can rebuild its
stream without talking to anyone else.
"""

import numpy as np


def rng_stream(seed: int, stream: int = 0) -> np.random.Generator:
    if seed < 0 or stream < 0:
        raise ValueError("seed and stream index must be non-negative")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=(int(stream),))))
