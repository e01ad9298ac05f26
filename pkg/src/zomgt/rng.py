"""Counter-based random streams keyed by (master seed, agent, iteration).

Each key maps to an independent Philox generator, so the draws an agent sees
at iteration ``k`` do not depend on the order in which agents are processed
or on how many threads run them.
"""

from __future__ import annotations

import numpy as np

SHARED_AGENT = 0


def stream(seed: int, agent: int, iteration: int, tag: int = 0) -> np.random.Generator:
    """Return the generator for one (seed, agent, iteration, tag) cell."""
    if min(seed, agent, iteration, tag) < 0:
        raise ValueError("stream keys must be non-negative")
    ss = np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, agent, iteration, tag])
    return np.random.Generator(np.random.Philox(ss))
