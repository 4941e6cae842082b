"""Deterministic child seeds derived from (master seed, purpose label, index)."""

import zlib

import numpy as np


def label_key(label):
    # crc32 is stable across processes, unlike hash()
    return zlib.crc32(label.encode("utf-8"))


def child_seed(master, label, index=0):
    """SeedSequence for one unit of work, independent of execution order."""
    return np.random.SeedSequence(entropy=int(master), spawn_key=(label_key(label), int(index)))


def child_rng(master, label, index=0):
    return np.random.default_rng(child_seed(master, label, index))


def as_generator(seed):
    """Accept an int, a SeedSequence or a Generator (Generators pass through)."""
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.default_rng(seed)
    if seed is None or isinstance(seed, (bool, float)):
        raise TypeError(f"seed must be an integer, SeedSequence or Generator, got {seed!r}")
    return np.random.default_rng(int(seed))
