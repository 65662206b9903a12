"""
Deterministic random-stream derivation.

Every stochastic component draws from its own substream derived from the
experiment seed plus a structural key (role, channel, mode, chunk), so
results do not depend on scheduling or on how work is partitioned.
"""

from __future__ import annotations

import numpy as np

# role codes used in spawn keys; fixed forever for reproducibility
PAIRS = 1
PORTS = 2
LOSS_SIGNAL = 3
LOSS_IDLER = 4
DETECT_SIGNAL = 5
DETECT_IDLER = 6
SPLITTER = 7
DETECT_IDLER_A = 8
DETECT_IDLER_B = 9
THINNING = 10


def substream(seed: int, *keys: int) -> np.random.Generator:
    """Generator for the substream identified by ``keys`` under ``seed``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.PCG64(ss))
