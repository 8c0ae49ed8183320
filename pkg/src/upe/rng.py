"""Counter-based random substreams.

Every draw in the package comes from a Philox generator keyed by
``(seed, index, variable)``. A replication or simulation block therefore
produces the same numbers whether it runs alone, in a batch, or on any worker.
"""
from __future__ import annotations

import numpy as np

#: Variable identifiers used as the last key component.
VAR_X = 0
VAR_U = 1
VAR_W = 2
VAR_Y = 3


def substream(seed: int, index: int, variable: int) -> np.random.Generator:
    if seed < 0 or index < 0 or variable < 0:
        raise ValueError("seed, index and variable must be non-negative")
    key = np.random.SeedSequence([int(seed), int(index), int(variable)])
    return np.random.Generator(np.random.Philox(key))
