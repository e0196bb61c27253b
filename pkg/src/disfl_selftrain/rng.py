"""Stable seed derivation.

Python's ``hash`` is salted per process, so every derived seed goes through
blake2b instead. The same (seed, *keys) always yields the same integer.
"""
import hashlib
import random


def stable_seed(seed, *keys) -> int:
    h = hashlib.blake2b(digest_size=8)
    h.update(repr(int(seed)).encode())
    for k in keys:
        h.update(b"\x1f")
        h.update(str(k).encode("utf-8"))
    return int.from_bytes(h.digest(), "little")


def stream(seed, *keys) -> random.Random:
    return random.Random(stable_seed(seed, *keys))


def stage_seed(seed, stage: str) -> int:
    """Seed for one named pipeline stage, kept to 31 bits."""
    return stable_seed(seed, stage) % (2 ** 31)
