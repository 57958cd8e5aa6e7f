"""Counter-based seeding so Monte-Carlo results do not depend on sharding.

Trials are cut into fixed-size blocks; block ``b`` draws from a generator
seeded with ``splitmix64(splitmix64(seed) ^ b)``. Any assignment of blocks to
shards or workers reproduces the same per-block streams.
"""

from __future__ import annotations

from typing import Iterator

import numpy as np

MASK64 = (1 << 64) - 1
BLOCK = 8192


def splitmix64(x: int) -> int:
    z = (x + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def block_seed(seed: int, block: int) -> int:
    return splitmix64(splitmix64(seed & MASK64) ^ block)


def block_sizes(trials: int, block: int = BLOCK) -> list[int]:
    if trials < 1:
        raise ValueError("trials must be >= 1")
    full, rest = divmod(trials, block)
    return [block] * full + ([rest] if rest else [])


def blocks(seed: int, trials: int, block: int = BLOCK) -> Iterator[tuple[int, int, np.random.Generator]]:
    """Yield ``(block_index, size, generator)`` covering ``trials`` trials."""
    for b, n in enumerate(block_sizes(trials, block)):
        yield b, n, np.random.default_rng(block_seed(seed, b))


def shard_blocks(n_blocks: int, shards: int) -> list[list[int]]:
    """Round-robin block assignment; used by tests to show shard-count independence."""
    return [list(range(s, n_blocks, shards)) for s in range(shards)]
