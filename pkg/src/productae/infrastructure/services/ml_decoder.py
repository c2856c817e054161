"""Exhaustive maximum-likelihood decoding for codes small enough to enumerate."""
from __future__ import annotations

from typing import Callable

import numpy as np

from productae.domain.errors import ConfigurationError, ShapeError

MAX_ENUMERATED_BITS = 16
SCORE_CHUNK_ELEMENTS = 1 << 22

Encoder = Callable[[np.ndarray], np.ndarray]


def message_range(start: int, stop: int, k: int) -> np.ndarray:
    """Messages start..stop-1 as (stop-start, k) bits, most significant bit first."""
    indices = np.arange(start, stop, dtype=np.int64)
    shifts = np.arange(k - 1, -1, -1, dtype=np.int64)
    return ((indices[:, None] >> shifts[None, :]) & 1).astype(np.uint8)


def enumerate_messages(k: int) -> np.ndarray:
    """All 2^k messages; row i is the binary expansion of i."""
    if k > MAX_ENUMERATED_BITS:
        raise ConfigurationError(f"refusing to enumerate 2^{k} messages (limit 2^{MAX_ENUMERATED_BITS})")
    return message_range(0, 1 << k, k)


def codebook(encoder: Encoder, k: int) -> tuple[np.ndarray, np.ndarray]:
    messages = enumerate_messages(k)
    return messages, np.asarray(encoder(messages), dtype=np.float64)


def nearest_codeword(y: np.ndarray, symbols: np.ndarray) -> np.ndarray:
    """Index of the closest codeword per row of `y`; the smallest index wins ties."""
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    if y.shape[1] != symbols.shape[1]:
        raise ShapeError(f"observations of width {y.shape[1]} against codewords of length {symbols.shape[1]}")
    energies = np.sum(symbols * symbols, axis=1)
    rows_per_chunk = max(1, SCORE_CHUNK_ELEMENTS // max(1, symbols.shape[0]))
    best = np.empty(y.shape[0], dtype=np.int64)
    for start in range(0, y.shape[0], rows_per_chunk):
        block = y[start : start + rows_per_chunk]
        # ‖y − c‖² = ‖y‖² − (2⟨y, c⟩ − ‖c‖²); the first term is shared by every candidate
        scores = 2.0 * block @ symbols.T - energies
        best[start : start + rows_per_chunk] = np.argmax(scores, axis=1)
    return best


def ml_decode_bruteforce(y: np.ndarray, encoder: Encoder, k: int) -> np.ndarray:
    messages, symbols = codebook(encoder, k)
    decided = messages[nearest_codeword(y, symbols)]
    return decided[0] if np.asarray(y).ndim == 1 else decided


class MlCodec:
    """Any enumerable encoder paired with exhaustive ML decoding."""

    def __init__(self, name: str, k: int, encoder: Encoder) -> None:
        self._name = name
        self._encoder = encoder
        self._messages, self._symbols = codebook(encoder, k)

    @property
    def name(self) -> str:
        return self._name

    @property
    def k(self) -> int:
        return self._messages.shape[1]

    @property
    def n(self) -> int:
        return self._symbols.shape[1]

    def encode(self, bits: np.ndarray) -> np.ndarray:
        return np.asarray(self._encoder(bits), dtype=np.float64)

    def decode(self, observations: np.ndarray, noise_std: np.ndarray) -> np.ndarray:
        # with equal noise on every symbol the nearest codeword is the ML choice
        return self._messages[nearest_codeword(observations, self._symbols)]
