"""Deterministic random streams derived from a single 64-bit master seed.

Every source of randomness in the toolkit (parameter init, dropout,
shuffling, sampling, synthetic data) draws from its own purpose-keyed
stream so that changing how one stage consumes randomness never perturbs
another stage.
"""

import numpy as np

_MASK64 = (1 << 64) - 1

_PURPOSES = {
    "init": 0,
    "dropout": 1,
    "shuffle": 2,
    "sample": 3,
    "synth": 4,
}


def stream(master_seed: int, purpose: str, *key: int) -> np.random.Generator:
    """Return the generator for `purpose` (plus optional sub-keys like an
    epoch index) under `master_seed`.  Same arguments, same stream."""
    if purpose not in _PURPOSES:
        raise ValueError(f"unknown stream purpose: {purpose!r}")
    ss = np.random.SeedSequence(
        entropy=master_seed & _MASK64,
        spawn_key=(_PURPOSES[purpose], *(k & _MASK64 for k in key)),
    )
    return np.random.Generator(np.random.PCG64(ss))
