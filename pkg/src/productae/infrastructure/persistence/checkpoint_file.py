"""Binary checkpoint files.

Layout (all integers little-endian):

    b"PAE1" | uint32 version | uint64 header length | UTF-8 JSON header | payload

The payload is float64 little-endian: every parameter in canonical order
(enc1, enc2, dec2_1, dec1_1, …; per layer the weight row-major, then the bias),
then, when optimizer state is present, all first moments and all second moments
in the same order, followed by the encoder and decoder step counters as uint64.
"""
from __future__ import annotations

import json
import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np
from pydantic import BaseModel, Field, ValidationError

from productae.domain.entities import ProductAeSpec
from productae.domain.errors import (
    BadMagicError,
    DimensionMismatchError,
    HeaderParseError,
    TruncatedPayloadError,
    UnsupportedVersionError,
)
from productae.domain.stats import ErrorStats
from productae.infrastructure.nn.optim import AdamState
from productae.infrastructure.services.neural_codec import ProductAeModel, network_dims

logger = logging.getLogger(__name__)

MAGIC = b"PAE1"
FORMAT_VERSION = 1
PREAMBLE = struct.Struct("<4sIQ")
COUNTERS = struct.Struct("<QQ")
SIDES = ("encoder", "decoder")


class CheckpointMeta(BaseModel):
    epoch: int = 0
    seed: int = 0
    validation: Dict[float, ErrorStats] = Field(default_factory=dict)
    fingerprint: str = ""


class OptimizerHyper(BaseModel):
    lr: float
    beta1: float
    beta2: float
    eps: float


class CheckpointHeader(BaseModel):
    spec: ProductAeSpec
    dims: Dict[str, int]
    layers: Dict[str, list[int]]
    parameter_count: int
    optimizer_state: bool
    optimizer: Optional[Dict[str, OptimizerHyper]] = None
    epoch: int
    seed: int
    validation: Dict[float, ErrorStats] = Field(default_factory=dict)
    fingerprint: str = ""


@dataclass
class LoadedCheckpoint:
    model: ProductAeModel
    meta: CheckpointMeta
    optimizer: Optional[Dict[str, AdamState]] = None


def payload_length(parameter_count: int, with_optimizer: bool) -> int:
    moments = 1 if with_optimizer else 0
    return 8 * parameter_count * (1 + 2 * moments) + COUNTERS.size * moments


def _header(model: ProductAeModel, meta: CheckpointMeta, optimizer: Optional[Dict[str, AdamState]]) -> CheckpointHeader:
    spec = model.spec
    return CheckpointHeader(
        spec=spec,
        dims={"n1": spec.n1, "k1": spec.k1, "n2": spec.n2, "k2": spec.k2, "I": spec.iterations, "F": spec.features},
        layers=model.layer_dims(),
        parameter_count=model.parameter_count(),
        optimizer_state=optimizer is not None,
        optimizer=None
        if optimizer is None
        else {
            side: OptimizerHyper(lr=state.lr, beta1=state.beta1, beta2=state.beta2, eps=state.eps)
            for side, state in optimizer.items()
        },
        epoch=meta.epoch,
        seed=meta.seed,
        validation=meta.validation,
        fingerprint=meta.fingerprint,
    )


def encode_checkpoint(
    model: ProductAeModel,
    meta: CheckpointMeta,
    optimizer: Optional[Dict[str, AdamState]] = None,
) -> bytes:
    header = _header(model, meta, optimizer).model_dump_json().encode("utf-8")
    arrays = [param.data for _, param in model.named_parameters()]
    if optimizer is not None:
        for moments in ("first_moment", "second_moment"):
            for side in SIDES:
                arrays.extend(getattr(optimizer[side], moments))
    payload = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for a in arrays)
    if optimizer is not None:
        payload += COUNTERS.pack(optimizer["encoder"].step_count, optimizer["decoder"].step_count)
    return PREAMBLE.pack(MAGIC, FORMAT_VERSION, len(header)) + header + payload


def save_checkpoint(
    model: ProductAeModel,
    meta: CheckpointMeta,
    path: Path,
    optimizer: Optional[Dict[str, AdamState]] = None,
) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_checkpoint(model, meta, optimizer))
    logger.debug("wrote checkpoint epoch %d to %s", meta.epoch, path)
    return path


def _parse_header(raw: bytes) -> CheckpointHeader:
    try:
        document: Any = json.loads(raw.decode("utf-8"))
        return CheckpointHeader.model_validate(document)
    except (UnicodeDecodeError, json.JSONDecodeError, ValidationError) as exc:
        raise HeaderParseError(f"checkpoint header is not valid: {exc}") from exc


def decode_checkpoint(blob: bytes) -> LoadedCheckpoint:
    if len(blob) < PREAMBLE.size or blob[:4] != MAGIC:
        raise BadMagicError("not a ProductAE checkpoint (magic bytes missing)")
    _, version, header_length = PREAMBLE.unpack_from(blob)
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(f"checkpoint format version {version} (this build reads {FORMAT_VERSION})")
    header_end = PREAMBLE.size + header_length
    if header_end > len(blob):
        raise HeaderParseError(f"header length {header_length} runs past the end of the file")
    header = _parse_header(blob[PREAMBLE.size : header_end])

    expected_layers = network_dims(header.spec)
    if header.layers != expected_layers:
        raise DimensionMismatchError(f"header layers {header.layers} disagree with the code's {expected_layers}")
    model = ProductAeModel.initialize(header.spec, np.random.default_rng(0))
    count = model.parameter_count()
    if header.parameter_count != count:
        raise DimensionMismatchError(f"header counts {header.parameter_count} parameters, spec implies {count}")

    payload = blob[header_end:]
    expected = payload_length(count, header.optimizer_state)
    if len(payload) != expected:
        raise TruncatedPayloadError(expected=expected, actual=len(payload))

    values = np.frombuffer(payload, dtype="<f8", count=count * (3 if header.optimizer_state else 1)).astype(np.float64)
    params = dict(model.named_parameters())
    shapes = [(name, param.shape) for name, param in params.items()]

    def unpack(flat: np.ndarray) -> list[np.ndarray]:
        out, offset = [], 0
        for _, shape in shapes:
            size = int(np.prod(shape))
            out.append(flat[offset : offset + size].reshape(shape).copy())
            offset += size
        return out

    model.load_state_dict({name: array for (name, _), array in zip(shapes, unpack(values[:count]))})
    meta = CheckpointMeta(epoch=header.epoch, seed=header.seed, validation=header.validation, fingerprint=header.fingerprint)
    if not header.optimizer_state:
        return LoadedCheckpoint(model=model, meta=meta)

    first = unpack(values[count : 2 * count])
    second = unpack(values[2 * count : 3 * count])
    enc_steps, dec_steps = COUNTERS.unpack_from(payload, 8 * 3 * count)
    n_enc = len(model.encoder_parameters())
    hyper = header.optimizer or {}
    optimizer: Dict[str, AdamState] = {}
    for side, part, steps in (("encoder", slice(0, n_enc), enc_steps), ("decoder", slice(n_enc, None), dec_steps)):
        settings = hyper.get(side) or OptimizerHyper(lr=2e-4, beta1=0.9, beta2=0.999, eps=1e-8)
        optimizer[side] = AdamState(
            first_moment=tuple(first[part]),
            second_moment=tuple(second[part]),
            step_count=int(steps),
            lr=settings.lr,
            beta1=settings.beta1,
            beta2=settings.beta2,
            eps=settings.eps,
        )
    return LoadedCheckpoint(model=model, meta=meta, optimizer=optimizer)


def load_checkpoint(path: Path) -> LoadedCheckpoint:
    return decode_checkpoint(Path(path).read_bytes())
