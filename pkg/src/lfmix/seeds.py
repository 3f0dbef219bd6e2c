"""Seed derivation: one root integer reproduces every random stream.

Each consumer asks for a stream by (root seed, label...). Labels are hashed
with SHA-256 (not Python's ``hash``, which is salted per process) and mixed
into a ``numpy.random.SeedSequence`` together with the root, splitmix-style,
so streams for different labels are statistically independent.
"""

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _label_entropy(label: str) -> int:
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def seed_sequence(root: int, *labels: str) -> np.random.SeedSequence:
    entropy = [int(root) & _MASK64] + [_label_entropy(l) for l in labels]
    return np.random.SeedSequence(entropy)


def derive_rng(root: int, *labels: str) -> np.random.Generator:
    """PRNG for the stream named by ``labels``, reproducible from ``root``."""
    return np.random.default_rng(seed_sequence(root, *labels))
