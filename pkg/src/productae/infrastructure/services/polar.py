"""Punctured polar codes: construction, encoding and successive-cancellation decoding.

Bit indices follow the natural (non bit-reversed) order of u·F^{⊗m} with
F = [[1, 0], [1, 1]]; the most significant index bit is the first channel split.
"""
from __future__ import annotations

import logging
import math
from typing import Optional

import numpy as np

from productae.domain.entities import PolarConstruction, PolarSpec
from productae.domain.errors import ConfigurationError, ShapeError

from .channel import llr_awgn, snr_db_to_sigma
from .linear_codes import bpsk
from .random_streams import stream

logger = logging.getLogger(__name__)

CONSTRUCTION_CHUNK = 10_000


def mother_length(n: int) -> int:
    return 1 << max(0, math.ceil(math.log2(n)))


def polar_transform(u: np.ndarray) -> np.ndarray:
    """x = u·F^{⊗m} over GF(2), batched on the leading axis."""
    x = np.array(np.atleast_2d(u), dtype=np.uint8, copy=True)
    rows, big_n = x.shape
    if big_n & (big_n - 1):
        raise ShapeError(f"polar transform length must be a power of two, got {big_n}")
    step = 1
    while step < big_n:
        view = x.reshape(rows, big_n // (2 * step), 2, step)
        view[:, :, 0, :] ^= view[:, :, 1, :]
        step *= 2
    return x if np.ndim(u) == 2 else x[0]


def generator_matrix(big_n: int) -> np.ndarray:
    kernel = np.array([[1, 0], [1, 1]], dtype=np.uint8)
    out = np.ones((1, 1), dtype=np.uint8)
    while out.shape[0] < big_n:
        out = np.kron(out, kernel).astype(np.uint8)
    return out


def random_puncture(big_n: int, n: int, seed: int) -> list[int]:
    """A uniformly random (N − n)-subset of coded positions, fixed by `seed`."""
    if not 0 < n <= big_n:
        raise ConfigurationError(f"cannot puncture length {big_n} down to {n}")
    rng = stream(seed, "polar", "puncture", big_n, n)
    return sorted(int(i) for i in rng.choice(big_n, size=big_n - n, replace=False))


def _check_node(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # exact boxplus: log((1 + e^{a+b}) / (e^a + e^b))
    return np.logaddexp(0.0, a + b) - np.logaddexp(a, b)


def _sc(
    llr: np.ndarray,
    frozen: np.ndarray,
    genie: Optional[np.ndarray],
    mistakes: Optional[np.ndarray],
    offset: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Decode one subtree; returns (u estimates, partial-sum codeword) for it."""
    width = llr.shape[1]
    if width == 1:
        decided = (llr[:, 0] < 0).astype(np.uint8)
        if genie is not None:
            mistakes[:, offset] = decided != genie[:, offset]
            decided = genie[:, offset]
        elif frozen[0]:
            decided = np.zeros_like(decided)
        column = decided[:, None]
        return column, column
    half = width // 2
    first, second = llr[:, :half], llr[:, half:]
    u_first, x_first = _sc(_check_node(first, second), frozen[:half], genie, mistakes, offset)
    u_second, x_second = _sc(second + (1.0 - 2.0 * x_first) * first, frozen[half:], genie, mistakes, offset + half)
    return np.hstack([u_first, u_second]), np.hstack([x_first ^ x_second, x_second])


def sc_decode_full(llrs: np.ndarray, frozen: np.ndarray) -> np.ndarray:
    """All N decisions û (frozen positions are 0) for a batch of length-N LLR rows."""
    llrs = np.atleast_2d(np.asarray(llrs, dtype=np.float64))
    u_hat, _ = _sc(llrs, np.asarray(frozen, dtype=bool), None, None, 0)
    return u_hat


def genie_sc_errors(llrs: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Per-bit-channel decision errors when every earlier bit is supplied by a genie."""
    mistakes = np.zeros(llrs.shape, dtype=bool)
    _sc(llrs, np.zeros(llrs.shape[1], dtype=bool), u, mistakes, 0)
    return mistakes


def kept_positions(spec: PolarSpec) -> np.ndarray:
    punctured = set(spec.punctured)
    return np.array([i for i in range(spec.mother_length) if i not in punctured], dtype=np.int64)


def polar_encode_bits(info_bits: np.ndarray, spec: PolarSpec) -> np.ndarray:
    """Transmitted code bits (punctured positions removed), shape (B, n)."""
    info_bits = np.atleast_2d(np.asarray(info_bits, dtype=np.uint8))
    if info_bits.shape[1] != spec.dimension:
        raise ShapeError(f"polar code takes {spec.dimension} information bits, got {info_bits.shape[1]}")
    u = np.zeros((info_bits.shape[0], spec.mother_length), dtype=np.uint8)
    u[:, spec.info_set] = info_bits
    return polar_transform(u)[:, kept_positions(spec)]


def polar_encode(info_bits: np.ndarray, spec: PolarSpec) -> np.ndarray:
    """BPSK symbols (0 → +1) of the punctured codeword."""
    symbols = bpsk(polar_encode_bits(info_bits, spec))
    return symbols[0] if np.ndim(info_bits) == 1 else symbols


def depuncture(llrs: np.ndarray, spec: PolarSpec) -> np.ndarray:
    """Length-n LLR rows → length-N rows with exact zeros at punctured positions."""
    llrs = np.atleast_2d(np.asarray(llrs, dtype=np.float64))
    full = np.zeros((llrs.shape[0], spec.mother_length))
    full[:, kept_positions(spec)] = llrs
    return full


def polar_sc_decode(llrs: np.ndarray, spec: PolarSpec) -> np.ndarray:
    """k information bits from length-N LLRs (zeros already at punctured indices)."""
    llrs = np.asarray(llrs, dtype=np.float64)
    rows = np.atleast_2d(llrs)
    if rows.shape[1] != spec.mother_length:
        raise ShapeError(f"SC decoding expects {spec.mother_length} LLRs per word, got {rows.shape[1]}")
    u_hat = sc_decode_full(rows, np.array(spec.frozen_mask))
    info = u_hat[:, spec.info_set]
    return info[0] if llrs.ndim == 1 else info


def bhattacharyya_parameters(big_n: int, design_snr_db: float) -> np.ndarray:
    """Bhattacharyya bound per bit channel for BPSK over AWGN, natural index order."""
    z = np.array([math.exp(-1.0 / snr_db_to_sigma(design_snr_db) ** 2)])
    while z.size < big_n:
        z = np.concatenate([2.0 * z - z * z, z * z])
        # interleave so the split just applied becomes the least significant index bit
        z = z.reshape(2, -1).T.reshape(-1)
    return z


def bhattacharyya_order(big_n: int, design_snr_db: float) -> list[int]:
    """Bit channels from most to least reliable (stable: smaller index first on ties)."""
    return [int(i) for i in np.argsort(bhattacharyya_parameters(big_n, design_snr_db), kind="stable")]


def estimate_bit_channel_ber(
    big_n: int,
    punctured: list[int],
    design_snr_db: float,
    trials: int,
    seed: int,
) -> np.ndarray:
    """Genie-aided SC error rate of every bit channel at `design_snr_db`."""
    sigma = snr_db_to_sigma(design_snr_db)
    rng = stream(seed, "polar", "construct", big_n)
    errors = np.zeros(big_n, dtype=np.int64)
    done = 0
    while done < trials:
        rows = min(CONSTRUCTION_CHUNK, trials - done)
        u = rng.integers(0, 2, size=(rows, big_n), dtype=np.uint8)
        y = bpsk(polar_transform(u)) + sigma * rng.standard_normal((rows, big_n))
        llrs = llr_awgn(y, sigma)
        llrs[:, punctured] = 0.0
        errors += genie_sc_errors(llrs, u).sum(axis=0)
        done += rows
    return errors / trials


def polar_construct(
    length: int,
    dimension: int,
    design_snr_db: float,
    trials: int,
    seed: int,
    punctured: Optional[list[int]] = None,
) -> PolarSpec:
    """Pick the `dimension` bit channels with the smallest estimated error rates."""
    big_n = mother_length(length)
    if not 0 < dimension <= length:
        raise ConfigurationError(f"need 0 < k <= n, got k={dimension}, n={length}")
    if punctured is None:
        punctured = random_puncture(big_n, length, seed)
    ber = estimate_bit_channel_ber(big_n, punctured, design_snr_db, trials, seed)
    degenerate = not np.any(ber > 0)
    if degenerate:
        logger.warning(
            "all %d bit-channel estimates are zero after %d trials at %.2f dB; ranking falls back to index order",
            big_n,
            trials,
            design_snr_db,
        )
    ranking = np.argsort(ber, kind="stable")
    info_set = sorted(int(i) for i in ranking[:dimension])
    logger.info("constructed polar (%d,%d) from N=%d with %d punctured positions", length, dimension, big_n, len(punctured))
    return PolarSpec(
        mother_length=big_n,
        length=length,
        dimension=dimension,
        info_set=info_set,
        punctured=list(punctured),
        construction=PolarConstruction(
            design_snr_db=design_snr_db,
            trials=trials,
            seed=seed,
            bit_channel_ber=[float(value) for value in ber],
            degenerate=degenerate,
        ),
    )


class PolarCodec:
    """Punctured polar code with BPSK over AWGN and SC decoding."""

    def __init__(self, spec: PolarSpec) -> None:
        self.spec = spec

    @property
    def name(self) -> str:
        return f"polar({self.spec.length},{self.spec.dimension})"

    @property
    def k(self) -> int:
        return self.spec.dimension

    @property
    def n(self) -> int:
        return self.spec.length

    def encode(self, bits: np.ndarray) -> np.ndarray:
        return bpsk(polar_encode_bits(bits, self.spec))

    def decode(self, observations: np.ndarray, noise_std: np.ndarray) -> np.ndarray:
        return polar_sc_decode(depuncture(llr_awgn(observations, noise_std), self.spec), self.spec)
