"""Seed handling.

Every stochastic routine takes either an integer seed or a
``numpy.random.Generator``. Integer seeds map to ``np.random.default_rng(seed)``
(PCG64 seeded through ``SeedSequence``). Independent sub-streams for grid cells
or replica chunks are derived with :func:`child_seed`, which places the
integer keys in the ``spawn_key`` of a ``SeedSequence`` built from the master
seed. The same (master, keys) always yields the same stream, regardless of
which worker runs it.
"""

from __future__ import annotations

import numpy as np



def as_generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def child_seed(master: int, *keys: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(master), spawn_key=tuple(int(k) for k in keys))


def child_rng(master: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(child_seed(master, *keys))
