"""Counter-split random streams.

One master seed drives a whole campaign; every consumer derives its own
independent stream from ``(seed, *path)`` where the path is a tuple of small
integers (drop index, purpose tag, trial block, ...).  Streams are therefore
independent of evaluation order and of how work is split across processes.
"""

from __future__ import annotations

import numpy as np

__all__ = ["substream"]

# Purpose tags used by the experiment harness (path component 2).
DEPLOYMENT = 0
ORTHOGONAL_MC = 1
BASELINE_MC = 2
RATE_GUARD = 3


def substream(seed: int, *path: int) -> np.random.Generator:
    """Return a generator for the sub-stream addressed by ``(seed, *path)``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(p) for p in path))
    return np.random.default_rng(ss)
