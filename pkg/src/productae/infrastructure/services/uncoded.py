"""Uncoded BPSK reference."""
from __future__ import annotations

from typing import Union

import numpy as np
from scipy.stats import norm

from .channel import snr_db_to_sigma
from .linear_codes import bpsk


def uncoded_bpsk_ber(snr_db: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """Q(1/σ), the bit error rate of hard-decided BPSK over AWGN."""
    sigma = np.asarray(snr_db_to_sigma(snr_db), dtype=np.float64)
    with np.errstate(divide="ignore"):
        ber = norm.sf(1.0 / sigma)
    return float(ber) if ber.ndim == 0 else ber


class UncodedCodec:
    def __init__(self, k: int) -> None:
        self._k = k

    @property
    def name(self) -> str:
        return f"uncoded({self._k})"

    @property
    def k(self) -> int:
        return self._k

    @property
    def n(self) -> int:
        return self._k

    def encode(self, bits: np.ndarray) -> np.ndarray:
        return bpsk(bits)

    def decode(self, observations: np.ndarray, noise_std: np.ndarray) -> np.ndarray:
        return (np.asarray(observations) < 0).astype(np.uint8)
