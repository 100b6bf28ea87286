"""Deterministic stream derivation for reproducible episodes.

Every episode gets its own 64-bit seed derived from (root_seed, episode
index) through a splitmix64 finalizer.  For a fixed root seed the map
index -> seed is injective, so episodes never share a stream no matter
how many replications a run asks for.

Within an episode, each consumer (one per arm, plus the sampler, stopper
and chooser) gets an independent Philox substream keyed by
(episode_seed, tag).  Philox is counter-based, so keyed substreams are
cheap to construct and statistically independent by design.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

# substream tags; arm k uses ARM_BASE + k
SAMPLER_TAG = 1
STOPPER_TAG = 2
CHOOSER_TAG = 3
BLOCK_TAG = 1 << 32
ARM_BASE = 1 << 16


def splitmix64(x: int) -> int:
    """One round of the splitmix64 finalizer (a bijection on 64-bit ints)."""
    x &= _MASK64
    x = (x + _GOLDEN) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def episode_seed(root_seed: int, index: int) -> int:
    """Seed for episode `index` under `root_seed`.

    Injective in `index` for fixed root: index -> root + golden*(index+1)
    is affine with an odd multiplier (mod 2^64), and splitmix64 is a
    bijection, so distinct indices cannot collide.
    """
    if index < 0:
        raise ValueError(f"episode index must be >= 0, got {index}")
    x = (root_seed + _GOLDEN * (index + 1)) & _MASK64
    return splitmix64(x)


def substream(seed: int, tag: int) -> np.random.Generator:
    """Independent generator for consumer `tag` under an episode seed."""
    key = np.array([seed & _MASK64, tag & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def block_stream(root_seed: int, block_index: int) -> np.random.Generator:
    """Generator owned by one block of a vectorized batch run.

    Batch runners partition episodes into fixed-size blocks and give each
    block its own stream, so results do not depend on how blocks are
    scheduled across workers.
    """
    return substream(splitmix64(root_seed), BLOCK_TAG + block_index)
