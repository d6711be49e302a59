"""Seeded random streams.

Every module draws from its own stream derived from the scenario seed and a
text label, so adding draws in one module never shifts another module's
sequence.  The generator is numpy's PCG64 seeded through SeedSequence with
the label's CRC-32 as spawn key.
"""

from __future__ import annotations

import zlib

import numpy as np


def label_key(label: str) -> int:
    return zlib.crc32(label.encode("utf-8"))


def seed_sequence(seed: int, label: str | None = None) -> np.random.SeedSequence:
    if seed < 0:
        raise ValueError("seed must be non-negative")
    if label is None:
        return np.random.SeedSequence(int(seed))
    return np.random.SeedSequence(int(seed), spawn_key=(label_key(label),))


def seeded_rng(seed: int, label: str | None = None) -> np.random.Generator:
    """Reproducible generator for ``(seed, label)``."""
    return np.random.Generator(np.random.PCG64(seed_sequence(seed, label)))
