"""AWGN and fast Rayleigh fading channels with point or per-row SNR policies."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, TypeVar, Union

import numpy as np

from productae.domain.entities import ChannelKind, PointSnr, RangeSnr
from productae.infrastructure.nn.tensor import Tensor

Signal = TypeVar("Signal", np.ndarray, Tensor)
Policy = Union[PointSnr, RangeSnr]

RAYLEIGH_COMPONENT_STD = math.sqrt(0.5)
LLR_LIMIT = 1e3


def snr_db_to_sigma(snr_db: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """Noise standard deviation for unit-power symbols: SNR = 1/σ²."""
    sigma = np.power(10.0, -np.asarray(snr_db, dtype=np.float64) / 20.0)
    return float(sigma) if sigma.ndim == 0 else sigma


@dataclass(frozen=True)
class ChannelRealization:
    """Everything random about one pass through the channel.

    `noise` holds standard-normal draws; the additive noise actually applied to
    row b is `noise_std[b] * noise[b]`.
    """

    snr_db: np.ndarray
    noise_std: np.ndarray
    noise: np.ndarray
    gain: Optional[np.ndarray] = None

    @property
    def rows(self) -> int:
        return self.noise.shape[0]

    def take(self, rows: slice) -> "ChannelRealization":
        return ChannelRealization(
            snr_db=self.snr_db[rows],
            noise_std=self.noise_std[rows],
            noise=self.noise[rows],
            gain=None if self.gain is None else self.gain[rows],
        )

    def apply(self, codewords: Signal) -> Signal:
        faded = codewords if self.gain is None else codewords * self.gain
        return faded + self.noise_std * self.noise


def sample_realization(
    kind: ChannelKind,
    policy: Policy,
    shape: tuple[int, int],
    rng: np.random.Generator,
) -> ChannelRealization:
    """Draw noise, then one SNR per row (row 0 first), then fading amplitudes."""
    rows, n = shape
    noise = rng.standard_normal((rows, n))
    lo, hi = policy.bounds()
    uniforms = rng.random(rows)
    snr_db = np.full(rows, lo) if hi == lo else lo + (hi - lo) * uniforms
    noise_std = np.asarray(snr_db_to_sigma(snr_db)).reshape(rows, 1)
    gain = None
    if kind is ChannelKind.RAYLEIGH:
        u = rng.normal(0.0, RAYLEIGH_COMPONENT_STD, size=(rows, n))
        v = rng.normal(0.0, RAYLEIGH_COMPONENT_STD, size=(rows, n))
        gain = np.hypot(u, v)
    return ChannelRealization(snr_db=snr_db, noise_std=noise_std, noise=noise, gain=gain)


def transmit(
    kind: ChannelKind,
    codewords: Signal,
    policy: Policy,
    rng: np.random.Generator,
) -> Signal:
    realization = sample_realization(kind, policy, codewords.shape, rng)
    return realization.apply(codewords)


def awgn_transmit(codewords: Signal, policy: Policy, rng: np.random.Generator) -> Signal:
    return transmit(ChannelKind.AWGN, codewords, policy, rng)


def rayleigh_transmit(codewords: Signal, policy: Policy, rng: np.random.Generator) -> Signal:
    return transmit(ChannelKind.RAYLEIGH, codewords, policy, rng)


def llr_awgn(y: np.ndarray, sigma: Union[float, np.ndarray]) -> np.ndarray:
    """Bit LLRs log P(0|y)/P(1|y) for BPSK 0 → +1, 1 → −1, clipped to ±LLR_LIMIT."""
    with np.errstate(divide="ignore", invalid="ignore"):
        llr = 2.0 * np.asarray(y, dtype=np.float64) / np.square(sigma)
    return np.clip(np.nan_to_num(llr, nan=0.0, posinf=LLR_LIMIT, neginf=-LLR_LIMIT), -LLR_LIMIT, LLR_LIMIT)
