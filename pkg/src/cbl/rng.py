"""Reproducible random streams keyed by ``(seed, name)``."""

from __future__ import annotations

import hashlib

import numpy as np


def name_key(name: str) -> int:
    """Stable 64-bit integer derived from ``name``."""
    return int.from_bytes(hashlib.sha256(name.encode("utf-8")).digest()[:8], "little")


def stream(seed: int, name: str) -> np.random.Generator:
    """Counter-based Philox generator; distinct names give independent streams."""
    if seed < 0:
        raise ValueError("seed must be nonnegative")
    key = np.array([int(seed) & 0xFFFFFFFFFFFFFFFF, name_key(name)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
