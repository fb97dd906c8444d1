"""Labeled seed derivation so every random stream traces back to one master seed."""

from __future__ import annotations

import hashlib

import numpy as np

# labels in use: "session", "trip", "noise", "split", "init", "shuffle", "dropout"


def derive_seed(master_seed: int, label: str, index: int = 0) -> int:
    payload = f"{int(master_seed)}:{label}:{int(index)}".encode()
    return int.from_bytes(hashlib.blake2b(payload, digest_size=8).digest(), "little")


def make_rng(master_seed: int, label: str, index: int = 0) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master_seed, label, index))
