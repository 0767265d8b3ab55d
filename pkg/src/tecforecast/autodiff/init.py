"""Seeded parameter initialization."""

from __future__ import annotations

import numpy as np


def param_rng(seed: int, index: int) -> np.random.Generator:
    """Independent PCG64 stream for parameter ``index`` of a model seeded with ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


def glorot_uniform(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int, fan_out: int,
                   dtype=np.float32) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape).astype(dtype)
