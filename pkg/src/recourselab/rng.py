"""Deterministic random-stream derivation.

Every sampling routine in this package takes an explicit numpy Generator.
Streams for parallel tasks are derived from a hierarchical integer key,
e.g. ``stream(master_seed, seed_index, applicant_index)``, so runs are
reproducible regardless of scheduling order.
"""

import numpy as np


def stream(*keys: int) -> np.random.Generator:
    """Return an independent generator keyed by a tuple of integers."""
    return np.random.default_rng(np.random.SeedSequence([int(k) for k in keys]))


def substreams(rng: np.random.Generator, n: int) -> list[np.random.Generator]:
    """Split a generator into ``n`` independent children."""
    return [np.random.default_rng(s) for s in rng.bit_generator.seed_seq.spawn(n)]
