"""Counter-based random streams keyed by (seed, path index, stream id).

Each simulated path draws from its own Philox generator whose 128-bit key
packs the experiment seed and the path index.  Stream ids occupy the top
counter word so independent uses (Brownian increments, fee arrivals, ...) of
the same path never overlap.  Path ``i`` is therefore identical whether it is
generated alone, in a batch, or on a worker thread.
"""

from __future__ import annotations

import numpy as np

STREAM_BROWNIAN = 0
STREAM_FLOW = 1

_MASK64 = (1 << 64) - 1


def path_generator(seed: int, path: int, stream: int = STREAM_BROWNIAN) -> np.random.Generator:
    if not (0 <= seed <= _MASK64):
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    if path < 0 or stream < 0:
        raise ValueError("path and stream must be non-negative")
    key = (seed << 64) | (path & _MASK64)
    bitgen = np.random.Philox(key=key, counter=[0, 0, 0, stream])
    return np.random.Generator(bitgen)
