"""Counter-based random streams.

Every stream is a Philox generator whose 128-bit key is a hash of a path of
labels (base seed, scenario id, replication index, purpose, ...).  A stream
therefore depends only on its path, never on how work is scheduled.
Indexed sub-streams (one per permutation replicate) reuse the key and put
the index in the top word of the Philox counter, so they never overlap.
"""

from __future__ import annotations

import hashlib

import numpy as np

GENERATOR_NAME = "numpy Philox4x64-10 (keyed by SHA-256 of the stream path)"


def derive_key(*path) -> np.ndarray:
    """128-bit Philox key from an arbitrary path of ints/strings."""
    text = "\x1f".join(repr(p) for p in path).encode()
    digest = hashlib.sha256(text).digest()
    return np.frombuffer(digest[:16], dtype=np.uint64).copy()


def stream(*path) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=derive_key(*path)))


def indexed_stream(key: np.ndarray, index: int) -> np.random.Generator:
    counter = np.array([0, 0, 0, index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))
