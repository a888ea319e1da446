"""Deterministic RNG forking: one run seed, an independent stream per subsystem."""

import hashlib

import numpy as np


def fork_rng(seed, *labels):
    """Build a Generator from a base seed and a fixed label path.

    Streams for distinct label paths are statistically independent, and the
    same (seed, labels) pair always reproduces the same stream no matter how
    many other streams were drawn before it.  Labels may be ints or strings.
    """
    entropy = [int(seed) & 0xFFFFFFFF]
    for label in labels:
        if isinstance(label, (int, np.integer)):
            entropy.append(int(label) & 0xFFFFFFFF)
        else:
            digest = hashlib.sha256(str(label).encode("utf-8")).digest()
            entropy.append(int.from_bytes(digest[:8], "little"))
    return np.random.default_rng(np.random.SeedSequence(entropy))
