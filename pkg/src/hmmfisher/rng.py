"""Deterministic RNG streams for parallel Monte Carlo.

Every replicate draws from its own counter-derived stream, keyed by the run
seed, an optional context prefix, and the replicate index. Stream identity
depends only on the key, never on scheduling, so results are reproducible for
any worker count.
"""

from __future__ import annotations

import numpy as np

# Replicates are processed in fixed-size chunks regardless of worker count so
# that array shapes (and hence accumulation order) never depend on --workers.
CHUNK_SIZE = 4096


def substream_seed(seed: int, *key: int) -> np.random.SeedSequence:
    """SeedSequence for a child stream identified by an integer key path."""
    return np.random.SeedSequence(entropy=seed, spawn_key=tuple(int(k) for k in key))


def replicate_rng(seed: int, index: int, *prefix: int) -> np.random.Generator:
    """Generator for one replicate; identical for any partitioning of work."""
    return np.random.default_rng(substream_seed(seed, *prefix, index))


def chunk_ranges(total: int, chunk_size: int = CHUNK_SIZE) -> list[tuple[int, int]]:
    """Split ``range(total)`` into contiguous [start, stop) chunks."""
    if total < 0:
        raise ValueError("total must be nonnegative")
    return [(lo, min(lo + chunk_size, total)) for lo in range(0, total, chunk_size)]
