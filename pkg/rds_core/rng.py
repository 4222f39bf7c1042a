"""RNG - Aliran bilangan acak deterministik yang dapat dipecah per replikasi."""

from typing import Optional, Union

import numpy as np

SeedLike = Union[None, int, np.random.Generator]


def make_rng(seed: SeedLike = None) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def spawn_stream(root_seed: int, *keys: int) -> np.random.Generator:
    """Stream independen untuk (root_seed, key1, key2, ...).

    Aturan pemecahan: SeedSequence(entropy=root_seed, spawn_key=keys). Stream
    yang sama selalu dihasilkan untuk kunci yang sama, terlepas dari urutan
    eksekusi atau jumlah worker.
    """
    sequence = np.random.SeedSequence(entropy=int(root_seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.default_rng(sequence)


def seed_from(rng: Optional[np.random.Generator]) -> int:
    if rng is None:
        return int(np.random.SeedSequence().entropy % (2**63))
    return int(rng.integers(0, 2**63 - 1))
