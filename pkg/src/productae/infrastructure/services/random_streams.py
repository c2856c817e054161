"""Named random sub-streams derived from one root seed."""
from __future__ import annotations

import hashlib
import json
from typing import Union

import numpy as np

PathPart = Union[str, int, float]


def stream_entropy(root_seed: int, *path: PathPart) -> int:
    payload = json.dumps([int(root_seed), *path], separators=(",", ":"))
    return int.from_bytes(hashlib.sha256(payload.encode("utf-8")).digest(), "big")


def stream(root_seed: int, *path: PathPart) -> np.random.Generator:
    """Generator for the component named by `path` (e.g. `stream(7, "sweep", 2, 0)`).

    Each path hashes to its own entropy, so introducing a new component never
    shifts the draws of an existing one.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy=stream_entropy(root_seed, *path))))


def random_bits(rng: np.random.Generator, rows: int, k: int) -> np.ndarray:
    return rng.integers(0, 2, size=(rows, k), dtype=np.uint8)
