"""Named sub-seeds derived from one base seed.

``derive_seed(base, "train", i)`` hashes ``(base, STREAMS["train"], i)``
through numpy's ``SeedSequence`` and returns a 63-bit integer, so every
stream is independent of the others and of the order in which they are
consumed.  All generators are numpy ``PCG64`` (``np.random.default_rng``).
"""

import numpy as np

STREAMS = {
    "bank": 0,
    "train": 1,
    "val": 2,
    "test": 3,
    "means": 4,
    "trial": 5,
    "probes": 6,
}


def derive_seed(base, stream, *index):
    key = (STREAMS[stream], *(int(i) for i in index))
    state = np.random.SeedSequence(int(base), spawn_key=key).generate_state(1, np.uint64)[0]
    return int(state >> np.uint64(1))


def derive_rng(base, stream, *index):
    return np.random.default_rng(derive_seed(base, stream, *index))
