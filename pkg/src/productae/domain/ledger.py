"""Training ledger: append-only epoch records, best and latest checkpoints, model picking."""
from __future__ import annotations

import math
from typing import Any, Dict, Iterable, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .errors import ConfigurationError
from .stats import ErrorStats


class EpochRecord(BaseModel):
    """One line of training history."""

    epoch: int
    phase: str = "train"
    train_loss: Optional[float] = None
    decoder_steps: int = 0
    encoder_steps: int = 0
    validation: Dict[float, ErrorStats] = Field(default_factory=dict)
    wall_time_s: float = 0.0

    def validation_at(self, snr_db: float) -> Optional[ErrorStats]:
        for snr, stats in self.validation.items():
            if math.isclose(snr, snr_db, abs_tol=1e-9):
                return stats
        return None


class Checkpoint(BaseModel):
    """Snapshot of a model (and its optimizers) at the end of an epoch."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    epoch: int
    weights: Dict[str, np.ndarray]
    optimizer: Optional[Any] = None
    validation: Dict[float, ErrorStats] = Field(default_factory=dict)
    fingerprint: str = ""


class TrainingLedger:
    """Keeps the epoch-indexed history of a run and a bounded set of checkpoints.

    Every record is kept. Checkpoints are kept only for the latest epoch and,
    for every validation SNR, the epoch with the lowest BER there, so any
    later `select_checkpoint` still finds its weights.
    """

    def __init__(self) -> None:
        self._records: List[EpochRecord] = []
        self._checkpoints: Dict[int, Checkpoint] = {}

    def __len__(self) -> int:
        return len(self._records)

    @property
    def records(self) -> list[EpochRecord]:
        return list(self._records)

    @property
    def checkpoints(self) -> list[Checkpoint]:
        """Retained checkpoints in epoch order."""
        return [self._checkpoints[epoch] for epoch in sorted(self._checkpoints)]

    @property
    def next_epoch(self) -> int:
        return self._records[-1].epoch + 1 if self._records else 0

    def append(self, record: EpochRecord, checkpoint: Checkpoint) -> None:
        if checkpoint.epoch != record.epoch:
            raise ValueError("checkpoint and record disagree on the epoch index")
        self._add(record, checkpoint)

    def extend(self, other: "TrainingLedger") -> None:
        for record in other._records:
            self._add(record, other._checkpoints.get(record.epoch))

    def _add(self, record: EpochRecord, checkpoint: Optional[Checkpoint]) -> None:
        if self._records and record.epoch <= self._records[-1].epoch:
            raise ValueError(
                f"epoch {record.epoch} does not follow epoch {self._records[-1].epoch}"
            )
        self._records.append(record)
        if checkpoint is not None:
            self._checkpoints[record.epoch] = checkpoint
        keep = self._retained_epochs()
        for epoch in [epoch for epoch in self._checkpoints if epoch not in keep]:
            del self._checkpoints[epoch]

    def _retained_epochs(self) -> set[int]:
        keep = {self._records[-1].epoch}
        for snr in {snr for record in self._records for snr in record.validation}:
            best = self._best_record(snr)
            if best is not None:
                keep.add(best.epoch)
        return keep

    def _best_record(self, snr_db: float) -> Optional[EpochRecord]:
        best: Optional[EpochRecord] = None
        best_ber = math.inf
        for record in self._records:
            stats = record.validation_at(snr_db)
            if stats is not None and stats.ber < best_ber:
                best, best_ber = record, stats.ber
        return best

    def select_checkpoint(self, criterion_snr: float) -> Checkpoint:
        """Checkpoint with the lowest validation BER at `criterion_snr`; earliest epoch on ties."""
        if not self._records:
            raise ConfigurationError("cannot select a checkpoint from an empty history")
        for record in self._records:
            if record.validation_at(criterion_snr) is None:
                raise ConfigurationError(
                    f"criterion SNR {criterion_snr} dB is not in the validation grid of epoch {record.epoch}"
                )
        best = self._best_record(criterion_snr)
        assert best is not None
        return self._checkpoints[best.epoch]


def select_checkpoint(history: TrainingLedger, criterion_snr: float) -> Checkpoint:
    return history.select_checkpoint(criterion_snr)


def ledger_from(records: Iterable[EpochRecord]) -> TrainingLedger:
    """Ledger of weight-less checkpoints, for picking an epoch from a stored history."""
    ledger = TrainingLedger()
    for record in records:
        ledger.append(
            record,
            Checkpoint(epoch=record.epoch, weights={}, validation=dict(record.validation)),
        )
    return ledger
