"""Seed derivation. Every random stream is a pure function of a master seed and keys."""

from __future__ import annotations

import numpy as np


def _zigzag(n: int) -> int:
    return 2 * n if n >= 0 else -2 * n - 1


def derive_seed(master: int, *keys: int) -> int:
    """A 63-bit integer seed determined by ``(master, *keys)``."""
    entropy = [_zigzag(int(master))] + [_zigzag(int(k)) for k in keys]
    hi, lo = np.random.SeedSequence(entropy).generate_state(2, np.uint32)
    return (int(hi) << 31) ^ int(lo)


def generator(master: int, *keys: int) -> np.random.Generator:
    entropy = [_zigzag(int(master))] + [_zigzag(int(k)) for k in keys]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def trial_seeds(master: int, n: int) -> list[int]:
    return [derive_seed(master, i) for i in range(n)]


# stream tags keep tapes, clocks and samplers from sharing entropy
TAG_ARW_TAPE = 1
TAG_SSM_TAPE = 2
TAG_POLICY = 3
TAG_START = 4
TAG_CLOCK = 5
TAG_WALK = 6
TAG_CLOUD = 7
