"""Seeded randomness.

Every random choice in the package comes from :class:`random.Random`
(Mersenne Twister, MT19937) instances.  Child streams are keyed by
:func:`derive_seed`, which hashes the parent seed together with a list of
labels using SHA-256 and keeps the first 8 bytes (big endian).  Two
implementations that follow this recipe produce the same seeds.
"""

from __future__ import annotations

import hashlib
import random


def derive_seed(seed: int, *labels: object) -> int:
    text = "/".join([str(int(seed))] + [str(label) for label in labels])
    return int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "big")


def make_rng(seed: int, *labels: object) -> random.Random:
    if labels:
        return random.Random(derive_seed(seed, *labels))
    return random.Random(int(seed))
