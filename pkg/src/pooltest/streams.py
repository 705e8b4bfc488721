"""Deterministic random-stream derivation.

Every stochastic consumer (truth sampling, assay noise, particle init,
SMC moves, group selection, decoding) draws from its own stream keyed
by (seed, cycle, label).  Changing what one consumer draws can then
never perturb another, which is what makes truth/policy separation and
campaign replay exact.
"""

from __future__ import annotations

import numpy as np

TRUTH = 1
NOISE = 2
PARTICLES = 3
SMC = 4
SELECT = 5
DECODE = 6


def stream(seed: int, cycle: int, label: int) -> np.random.Generator:
    """Independent generator for one consumer at one cycle."""
    if seed < 0:
        raise ValueError("seeds must be non-negative")
    return np.random.default_rng(np.random.SeedSequence((int(seed), int(cycle), int(label))))


def run_seed(master_seed: int, run_index: int) -> int:
    """Derived per-run seed; feeding it to a campaign reproduces the run's policy streams."""
    if master_seed < 0 or run_index < 0:
        raise ValueError("seeds and run indices must be non-negative")
    ss = np.random.SeedSequence((int(master_seed), int(run_index)))
    return int(ss.generate_state(1, np.uint64)[0])
