"""Deterministic per-purpose random streams.

Every stochastic step in the pipeline draws from a Philox counter-based
generator keyed by SHA-256(seed, purpose-tag), so independent purposes
(weight init, batch shuffling, query sampling, ...) get independent streams
and the whole pipeline is a pure function of its seeds.
"""

import hashlib

import numpy as np


def stream(seed: int, tag: str) -> np.random.Generator:
    """Return a fresh generator for (seed, tag). Same arguments, same stream."""
    digest = hashlib.sha256(f"{seed}:{tag}".encode()).digest()
    key = int.from_bytes(digest[:16], "little")
    return np.random.Generator(np.random.Philox(key=key))


def derive_seed(seed: int, tag: str) -> int:
    """Derive a 63-bit child seed from (seed, tag), for nested components."""
    digest = hashlib.sha256(f"{seed}:{tag}".encode()).digest()
    return int.from_bytes(digest[16:24], "little") >> 1
