"""Deterministic seed derivation.

Every run consumes one integer seed; module-level streams are derived by
hashing a string label into a SeedSequence child, so concurrent generators
never share a stream and results are reproducible bit-for-bit.
"""

from __future__ import annotations

import hashlib

import numpy as np


def child_seed(seed: int, label: str) -> np.random.SeedSequence:
    digest = hashlib.blake2b(label.encode("utf-8"), digest_size=8).digest()
    return np.random.SeedSequence([int(seed), int.from_bytes(digest, "big")])


def rng_for(seed: int, label: str) -> np.random.Generator:
    return np.random.default_rng(child_seed(seed, label))
