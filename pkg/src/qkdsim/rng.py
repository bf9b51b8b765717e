"""Named pseudo-random substreams derived from one run seed.

Splitting the seed by name keeps independent parts of the simulation
(topology, initial key fills, round durations, protocol jitter) on separate
streams, so toggling one feature does not perturb the draws of another.
"""

from __future__ import annotations

import random


def substream(seed: int, name: str) -> random.Random:
    return random.Random(f"{seed}:{name}")
