"""Monte-Carlo error tallies and sweep results."""
from __future__ import annotations

import math
from typing import Iterable, Optional

from pydantic import BaseModel, Field, NonNegativeInt, PositiveInt, model_validator

from .entities import ChannelKind

Z_95 = 1.959963984540054


class ErrorStats(BaseModel):
    """Bit and block error counters over `trials` blocks of `k` message bits."""

    trials: NonNegativeInt = 0
    bit_errors: NonNegativeInt = 0
    block_errors: NonNegativeInt = 0
    k: PositiveInt

    @model_validator(mode="after")
    def _consistent(self) -> "ErrorStats":
        if self.block_errors > self.trials:
            raise ValueError("more block errors than trials")
        if self.bit_errors > self.trials * self.k:
            raise ValueError("more bit errors than transmitted bits")
        # each erroneous block holds between 1 and k wrong bits
        if not self.block_errors <= self.bit_errors <= self.block_errors * self.k:
            raise ValueError("bit/block error counters are inconsistent")
        return self

    @property
    def ber(self) -> float:
        return self.bit_errors / (self.trials * self.k) if self.trials else 0.0

    @property
    def bler(self) -> float:
        return self.block_errors / self.trials if self.trials else 0.0

    @property
    def ber_half_width(self) -> float:
        bits = self.trials * self.k
        return Z_95 * math.sqrt(self.ber * (1 - self.ber) / bits) if bits else 0.0

    @property
    def bler_half_width(self) -> float:
        return Z_95 * math.sqrt(self.bler * (1 - self.bler) / self.trials) if self.trials else 0.0

    @property
    def ber_std_error(self) -> float:
        return self.ber_half_width / Z_95

    def merge(self, other: "ErrorStats") -> "ErrorStats":
        if other.k != self.k:
            raise ValueError(f"cannot merge tallies of k={self.k} and k={other.k}")
        return ErrorStats(
            trials=self.trials + other.trials,
            bit_errors=self.bit_errors + other.bit_errors,
            block_errors=self.block_errors + other.block_errors,
            k=self.k,
        )

    @classmethod
    def total(cls, parts: Iterable["ErrorStats"], k: int) -> "ErrorStats":
        result = cls(k=k)
        for part in parts:
            result = result.merge(part)
        return result


class SweepPoint(BaseModel):
    snr_db: float
    stats: ErrorStats
    capped: bool = False


class SweepResult(BaseModel):
    """Error rates of one codec over an SNR grid."""

    codec: str
    channel: ChannelKind
    seed: int
    shards: PositiveInt = 1
    points: list[SweepPoint] = Field(default_factory=list)

    @model_validator(mode="after")
    def _increasing(self) -> "SweepResult":
        grid = [point.snr_db for point in self.points]
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("sweep SNR points must be strictly increasing")
        return self

    @property
    def snrs(self) -> list[float]:
        return [point.snr_db for point in self.points]

    def at(self, snr_db: float) -> Optional[SweepPoint]:
        for point in self.points:
            if math.isclose(point.snr_db, snr_db, abs_tol=1e-9):
                return point
        return None
