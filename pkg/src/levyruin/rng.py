"""Counter-based random streams.

Every stream is a Philox generator keyed by ``(seed, domain, index, tag)``.
Ensembles are cut into fixed-size blocks and each block owns its streams, so
the draws for a given replicate never depend on how blocks are scheduled.
"""

from __future__ import annotations

import numpy as np

# process tags
TAG_V = 0
TAG_P = 1
TAG_AUX = 2

# key domains
DOMAIN_SINGLE = 0
DOMAIN_BLOCK = 1


def stream(seed: int, domain: int, index: int, tag: int, sub: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(domain), int(sub), int(index), int(tag)))
    return np.random.Generator(np.random.Philox(ss))


def replicate_streams(seed: int, replicate_index: int, stream_id: int = 0):
    """(V, P) generators for a single replicate."""
    return (
        stream(seed, DOMAIN_SINGLE, replicate_index, TAG_V, stream_id),
        stream(seed, DOMAIN_SINGLE, replicate_index, TAG_P, stream_id),
    )


def block_streams(seed: int, block_index: int, stream_id: int = 0):
    """(V, P) generators for one ensemble block."""
    return (
        stream(seed, DOMAIN_BLOCK, block_index, TAG_V, stream_id),
        stream(seed, DOMAIN_BLOCK, block_index, TAG_P, stream_id),
    )


def aux_stream(seed: int, block_index: int, stream_id: int = 0) -> np.random.Generator:
    return stream(seed, DOMAIN_BLOCK, block_index, TAG_AUX, stream_id)
