"""Named random sub-streams derived from one 64-bit run seed.

Every source of randomness in a run (activity schedule, shadowing, core
delay, HARQ draws, ...) pulls from its own stream keyed by name, and
per-packet draws are keyed by sequence number.  Toggling one feature
therefore never perturbs the draws another feature sees, which keeps
paired-seed scenario comparisons tightly coupled.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _tag_to_int(tag) -> int:
    if isinstance(tag, (int, np.integer)):
        return int(tag) & 0xFFFFFFFFFFFFFFFF
    digest = hashlib.blake2s(str(tag).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def substream(seed: int, *tags) -> np.random.Generator:
    """Deterministic generator for (seed, *tags), stable across platforms."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [_tag_to_int(t) for t in tags]
    return np.random.default_rng(np.random.SeedSequence(entropy))
