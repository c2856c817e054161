"""Binary linear block codes and their product construction."""
from __future__ import annotations

import functools
import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from productae.domain.entities import LinearCodeSpec, ProductCodeSpec
from productae.domain.errors import ConfigurationError, ShapeError

from .ml_decoder import MlCodec, message_range

logger = logging.getLogger(__name__)

MAX_DISTANCE_BITS = 20
DISTANCE_CHUNK = 1 << 14
MATMUL_CHUNK = 4096


def as_bits(matrix: Sequence[Sequence[int]] | np.ndarray) -> np.ndarray:
    bits = np.asarray(matrix, dtype=np.uint8)
    if np.any(bits > 1):
        raise ValueError("GF(2) matrices hold only 0 and 1")
    return bits


def gf2_matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product over GF(2): AND for products, XOR for sums."""
    a, b = as_bits(a), as_bits(b)
    if a.shape[-1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    flat = a.reshape(-1, a.shape[-1])
    out = np.empty((flat.shape[0], b.shape[1]), dtype=np.uint8)
    for start in range(0, flat.shape[0], MATMUL_CHUNK):
        block = flat[start : start + MATMUL_CHUNK]
        out[start : start + MATMUL_CHUNK] = np.bitwise_xor.reduce(block[:, :, None] & b[None, :, :], axis=1)
    return out.reshape(*a.shape[:-1], b.shape[1])


def kronecker(g1: np.ndarray, g2: np.ndarray) -> np.ndarray:
    """Block (i, j) of the result is g1[i, j] · g2."""
    return np.kron(as_bits(g1), as_bits(g2)).astype(np.uint8)


def product_generator(components: Sequence[LinearCodeSpec]) -> np.ndarray:
    """G₁ ⊗ G₂ ⊗ … ⊗ G_M."""
    return functools.reduce(kronecker, (as_bits(code.generator) for code in components))


# -- component families -----------------------------------------------------


def hamming_code(r: int) -> LinearCodeSpec:
    """Systematic Hamming code of length 2^r − 1 as [I | A]."""
    if r < 2:
        raise ValueError("Hamming codes need r >= 2")
    n = (1 << r) - 1
    columns = [value for value in range(1, n + 1) if bin(value).count("1") >= 2]
    parity = np.array([[(value >> shift) & 1 for shift in range(r - 1, -1, -1)] for value in columns], dtype=np.uint8)
    generator = np.hstack([np.eye(len(columns), dtype=np.uint8), parity])
    return LinearCodeSpec(name=f"hamming({n},{n - r})", generator=generator.tolist())


def single_parity_check(k: int) -> LinearCodeSpec:
    generator = np.hstack([np.eye(k, dtype=np.uint8), np.ones((k, 1), dtype=np.uint8)])
    return LinearCodeSpec(name=f"spc({k + 1},{k})", generator=generator.tolist())


def repetition_code(n: int) -> LinearCodeSpec:
    return LinearCodeSpec(name=f"rep({n},1)", generator=[[1] * n])


COMPONENT_FAMILIES = {"hamming": hamming_code, "spc": single_parity_check, "rep": repetition_code}


def component_from_token(token: str) -> LinearCodeSpec:
    """Parse `family:param`, e.g. `hamming:3`, `spc:3`, `rep:3`."""
    family, _, raw = token.partition(":")
    builder = COMPONENT_FAMILIES.get(family.strip().lower())
    if builder is None or not raw.strip().isdigit():
        raise ConfigurationError(
            f"cannot parse component {token!r}; expected one of {sorted(COMPONENT_FAMILIES)} followed by :<int>"
        )
    return builder(int(raw))


# -- encoding ---------------------------------------------------------------


def encode_linear(bits: np.ndarray, code: LinearCodeSpec) -> np.ndarray:
    return gf2_matmul(bits, as_bits(code.generator))


def _encode_axis(array: np.ndarray, axis: int, generator: np.ndarray) -> np.ndarray:
    moved = np.moveaxis(array, axis, -1)
    return np.moveaxis(gf2_matmul(moved, generator), -1, axis)


def product_encode(
    bits: np.ndarray,
    components: Sequence[LinearCodeSpec],
    order: Optional[Sequence[int]] = None,
) -> np.ndarray:
    """Encode a product code on its array layout.

    `bits` of width k₁⋯k_M (optionally batched on a leading axis) is reshaped
    row-major to (k_M, …, k₁); code m encodes the axis holding k_m, giving
    (n_M, …, n₁). For two components this is reshape to k₂ × k₁, encode rows
    with C₁ and columns with C₂. `order` picks the sequence in which the
    components are applied; the result does not depend on it.
    """
    bits = as_bits(bits)
    k_dims = [code.k for code in reversed(components)]
    single = bits.ndim == 1
    batch = bits.reshape(1, -1) if single else bits
    if batch.shape[1] != int(np.prod(k_dims)):
        raise ShapeError(f"product code takes {int(np.prod(k_dims))} message bits, got {batch.shape[1]}")
    array = batch.reshape(batch.shape[0], *k_dims)
    for m in order if order is not None else range(len(components)):
        array = _encode_axis(array, array.ndim - 1 - m, as_bits(components[m].generator))
    return array[0] if single else array


def to_kronecker_order(array: np.ndarray, batched: bool = True) -> np.ndarray:
    """Flatten an array-layout word so index i₁ is most significant (the G₁ ⊗ … ⊗ G_M order)."""
    lead = 1 if batched else 0
    axes = list(range(lead)) + list(range(array.ndim - 1, lead - 1, -1))
    flipped = np.transpose(array, axes)
    return flipped.reshape(array.shape[0], -1) if batched else flipped.reshape(-1)


def from_kronecker_order(words: np.ndarray, dims: Sequence[int]) -> np.ndarray:
    """Inverse of `to_kronecker_order` for a batch; `dims` is the array layout (d_M, …, d₁)."""
    reversed_dims = list(reversed(dims))
    staged = words.reshape(words.shape[0], *reversed_dims)
    axes = [0] + list(range(staged.ndim - 1, 0, -1))
    return np.transpose(staged, axes)


def product_layout(components: Sequence[LinearCodeSpec]) -> dict[str, tuple[int, ...]]:
    """Array shapes of the message and codeword (last axis belongs to C₁)."""
    return {
        "message": tuple(code.k for code in reversed(components)),
        "codeword": tuple(code.n for code in reversed(components)),
    }


@dataclass(frozen=True)
class ProductParams:
    n: int
    k: int
    d: Optional[int]
    rate: float


def minimum_distance(generator: np.ndarray) -> int:
    """Smallest nonzero codeword weight by exhaustive enumeration."""
    k = generator.shape[0]
    if k > MAX_DISTANCE_BITS:
        raise ConfigurationError(f"minimum distance enumeration is limited to k <= {MAX_DISTANCE_BITS}")
    best = generator.shape[1]
    for start in range(1, 1 << k, DISTANCE_CHUNK):
        stop = min(1 << k, start + DISTANCE_CHUNK)
        weights = gf2_matmul(message_range(start, stop, k), generator).sum(axis=1)
        best = min(best, int(weights.min()))
    return best


def product_params(components: Sequence[LinearCodeSpec]) -> ProductParams:
    spec = ProductCodeSpec(components=list(components))
    distance = minimum_distance(product_generator(components)) if spec.k <= MAX_DISTANCE_BITS else None
    return ProductParams(n=spec.n, k=spec.k, d=distance, rate=spec.rate)


def bpsk(bits: np.ndarray) -> np.ndarray:
    """0 → +1, 1 → −1."""
    return 1.0 - 2.0 * np.asarray(bits, dtype=np.float64)


class ProductCodec(MlCodec):
    """Classical product code, BPSK-modulated on its array layout, decoded by exhaustive ML."""

    def __init__(self, spec: ProductCodeSpec) -> None:
        components = list(spec.components)
        name = "product[" + "x".join(code.name for code in components) + "]"

        def encoder(bits: np.ndarray) -> np.ndarray:
            words = product_encode(bits, components)
            return bpsk(words.reshape(words.shape[0], -1))

        super().__init__(name, spec.k, encoder)
        self.spec = spec
