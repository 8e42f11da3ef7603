"""Deterministic RNG derivation.

Streams are derived from (master seed, *path) via SHA-256, so any component
(trial selection, a bootstrap replicate, a simulator node) gets a stable
generator that is independent of execution order and worker count.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(master_seed: int, *path) -> int:
    payload = repr((int(master_seed),) + tuple(path)).encode()
    digest = hashlib.sha256(payload).digest()
    return int.from_bytes(digest[:8], "little")


def rng_for(master_seed: int, *path) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master_seed, *path))
