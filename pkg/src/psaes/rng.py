"""Deterministic random-stream derivation.

Every random draw in a run comes from a substream keyed by
``(seed, generation, purpose)`` so that identical run configurations produce
bit-identical traces, and so the Monte Carlo estimator inside the
population-size update cannot perturb the main sampling stream.
"""

from __future__ import annotations

import numpy as np

# Purpose tags.  Fixed small integers, never derived from hash().
TAG_INIT = 0
TAG_SAMPLE = 1
TAG_PSA_MC = 2
TAG_NEUTRAL = 3


def substream(seed: int, generation: int, tag: int) -> np.random.Generator:
    """Return an independent generator for one purpose within one generation."""
    ss = np.random.SeedSequence(entropy=(int(seed), int(generation), int(tag)))
    return np.random.default_rng(ss)
