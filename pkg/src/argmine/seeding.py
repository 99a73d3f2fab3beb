"""Deterministic seed derivation.

All randomness in a pipeline run flows from one 64-bit seed. Stages derive
their own seed by hashing the stage name with the global seed, so a stage can
be re-run in isolation and still see the exact stream it saw in a full run.
"""

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def derive_seed(seed: int, label: str) -> int:
    """Derive a stage seed from a global seed and a stage label."""
    key = (seed & _MASK64).to_bytes(8, "little")
    digest = hashlib.blake2b(label.encode("utf-8"), digest_size=8, key=key).digest()
    return int.from_bytes(digest, "little")


def rng_for(seed: int, label: str) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, label))
