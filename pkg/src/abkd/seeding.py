"""Deterministic seed derivation and weight initialization helpers."""

import zlib

import numpy as np


def derive_seed(seed: int, tag: str) -> int:
    """Derive a stable child seed for one component of a run.

    Components (teacher init, student init, head init, ...) draw from
    independent streams so that adding or removing one component never
    shifts another's randomness.
    """
    ss = np.random.SeedSequence([int(seed), zlib.crc32(tag.encode("utf-8"))])
    return int(ss.generate_state(1)[0])


def make_rng(seed) -> np.random.Generator:
    """Generator from an int seed or a SeedSequence."""
    if isinstance(seed, np.random.SeedSequence):
        return np.random.default_rng(seed)
    return np.random.default_rng(int(seed))


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    """Glorot/Xavier uniform init for a fan_in x fan_out weight matrix."""
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))
