"""Deterministic RNG derivation.

Every random decision in the pipeline draws from a generator derived from
(global seed, namespace parts) via a cryptographic digest, never from the
process-global RNG. That makes output a pure function of (inputs, seed),
independent of worker count or scheduling: each document/window/stage owns
its own stream.
"""

import hashlib

import numpy as np


def derive_seed(*parts: object) -> int:
    """Collapse an arbitrary key (ints, strings) into a stable 64-bit seed."""
    key = "\x1f".join(str(p) for p in parts)
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def derive_rng(*parts: object) -> np.random.Generator:
    """Independent generator for the stream named by `parts`."""
    return np.random.default_rng(derive_seed(*parts))
