"""Named sub-seeds so results do not depend on the order work is done in."""

import hashlib

import numpy as np


def derive_seed(root: int, stage: str, *item) -> int:
    """64-bit seed from (root seed, stage name, item id...)."""
    key = "\x1f".join([str(int(root)), stage, *map(str, item)]).encode()
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little")


def rng_for(root: int, stage: str, *item) -> np.random.Generator:
    return np.random.default_rng(derive_seed(root, stage, *item))
