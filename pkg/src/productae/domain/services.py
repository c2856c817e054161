"""Domain service protocols for the ProductAE laboratory."""
from __future__ import annotations

from typing import Protocol, Sequence

import numpy as np

from .ledger import EpochRecord
from .stats import SweepResult


class Codec(Protocol):
    """Anything a Monte-Carlo sweep can push message words through."""

    @property
    def name(self) -> str:
        """Label used in results."""

    @property
    def k(self) -> int:
        """Message bits per block."""

    @property
    def n(self) -> int:
        """Transmitted real symbols per block."""

    def encode(self, bits: np.ndarray) -> np.ndarray:
        """Map a (B, k) bit batch to (B, n) real channel symbols."""

    def decode(self, observations: np.ndarray, noise_std: np.ndarray) -> np.ndarray:
        """Return (B, k) bit decisions; `noise_std` is the per-row noise level, shape (B, 1)."""


class ResultRepository(Protocol):
    """Persistence interface for the run registry."""

    def start_run(self, kind: str, config_json: str, seed: int) -> int:
        """Register a run and return its ID."""

    def save_epochs(self, run_id: int, records: Sequence[EpochRecord]) -> None:
        """Persist training history records."""

    def save_sweep(self, run_id: int, label: str, result: SweepResult) -> None:
        """Persist every point of a sweep."""

    def load_sweep(self, run_id: int, label: str) -> SweepResult:
        """Return a stored sweep."""
