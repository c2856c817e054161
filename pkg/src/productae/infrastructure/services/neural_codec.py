"""Two-dimensional product autoencoder: neural encoder pair and the iterative decoder."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterator, Mapping, Optional, Union

import numpy as np

from productae.domain.entities import NetShape, ProductAeSpec
from productae.domain.errors import DegenerateInputError, ShapeError
from productae.infrastructure.nn.layers import Mlp
from productae.infrastructure.nn.tensor import Parameter, Tensor, as_tensor, concatenate, no_grad

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class NetworkIo:
    name: str
    in_dim: int
    out_dim: int


def encoder_io_sizes(spec: ProductAeSpec) -> list[NetworkIo]:
    return [NetworkIo("enc1", spec.k1, spec.n1), NetworkIo("enc2", spec.k2, spec.n2)]


def decoder_io_sizes(spec: ProductAeSpec) -> list[NetworkIo]:
    """Input/output widths of D2 and D1 for every decoding iteration, in decoding order."""
    n1, k1, n2, k2 = spec.n1, spec.k1, spec.n2, spec.k2
    last, f = spec.iterations, spec.features
    table: list[NetworkIo] = []
    for i in range(1, last + 1):
        d2_in = n2 if i == 1 else (f + 1) * n2
        d2_out = f * k2 if i == last else f * n2
        d1_in = f * n1 if i == last else (f + 1) * n1
        d1_out = k1 if i == last else f * n1
        table.append(NetworkIo(f"dec2_{i}", d2_in, d2_out))
        table.append(NetworkIo(f"dec1_{i}", d1_in, d1_out))
    return table


def network_shape(spec: ProductAeSpec, name: str) -> NetShape:
    if name == "enc1":
        return spec.encoder1
    if name == "enc2":
        return spec.encoder2
    return spec.decoder_shape(int(name.rsplit("_", 1)[1]))


def network_dims(spec: ProductAeSpec) -> Dict[str, list[int]]:
    """Layer widths of every network (input, hidden..., output) in canonical order."""
    dims: Dict[str, list[int]] = {}
    for io in (*encoder_io_sizes(spec), *decoder_io_sizes(spec)):
        shape = network_shape(spec, io.name)
        dims[io.name] = [io.in_dim, *([shape.hidden_width] * shape.hidden_layers), io.out_dim]
    return dims


def parameter_counts(spec: ProductAeSpec) -> Dict[str, int]:
    """Learnable parameter totals of the encoder side and the decoder side."""
    counts = {"encoder": 0, "decoder": 0}
    for name, dims in network_dims(spec).items():
        total = sum(d_in * d_out + d_out for d_in, d_out in zip(dims, dims[1:]))
        counts["encoder" if name.startswith("enc") else "decoder"] += total
    return counts


def bits_to_symbols(bits: np.ndarray) -> np.ndarray:
    """0 → −1, 1 → +1."""
    bits = np.asarray(bits)
    if not np.all((bits == 0) | (bits == 1)):
        raise DegenerateInputError("message words must be binary")
    return 2.0 * bits.astype(np.float64) - 1.0


def hard_decision(logits: Union[Tensor, np.ndarray]) -> np.ndarray:
    """Bit 1 iff the logit is strictly positive."""
    values = logits.data if isinstance(logits, Tensor) else np.asarray(logits)
    return (values > 0).astype(np.uint8)


class ProductAeModel:
    """Encoders E1, E2 and the decoder pairs (D2⁽ⁱ⁾, D1⁽ⁱ⁾), i = 1..I."""

    def __init__(self, spec: ProductAeSpec, networks: Mapping[str, Mlp]) -> None:
        expected = {io.name: io for io in (*encoder_io_sizes(spec), *decoder_io_sizes(spec))}
        if set(networks) != set(expected):
            raise ShapeError(f"model needs networks {sorted(expected)}, got {sorted(networks)}")
        for name, io in expected.items():
            net = networks[name]
            if (net.in_dim, net.out_dim) != (io.in_dim, io.out_dim):
                raise ShapeError(
                    f"{name} maps {net.in_dim}→{net.out_dim}, expected {io.in_dim}→{io.out_dim}"
                )
        self.spec = spec
        self._networks: Dict[str, Mlp] = {name: networks[name] for name in expected}

    @classmethod
    def initialize(cls, spec: ProductAeSpec, rng: np.random.Generator) -> "ProductAeModel":
        networks = {}
        for io in (*encoder_io_sizes(spec), *decoder_io_sizes(spec)):
            shape = network_shape(spec, io.name)
            networks[io.name] = Mlp.build(io.name, io.in_dim, io.out_dim, shape.hidden_layers, shape.hidden_width, rng)
        return cls(spec, networks)

    # -- parameter access ---------------------------------------------------

    def network(self, name: str) -> Mlp:
        return self._networks[name]

    @property
    def networks(self) -> Dict[str, Mlp]:
        return dict(self._networks)

    def named_parameters(self) -> Iterator[tuple[str, Parameter]]:
        for net in self._networks.values():
            yield from net.named_parameters()

    def parameters(self) -> list[Parameter]:
        return [param for _, param in self.named_parameters()]

    def encoder_parameters(self) -> list[Parameter]:
        return self._networks["enc1"].parameters() + self._networks["enc2"].parameters()

    def decoder_parameters(self, pair: Optional[int] = None) -> list[Parameter]:
        pairs = range(1, self.spec.iterations + 1) if pair is None else [pair]
        params: list[Parameter] = []
        for i in pairs:
            params += self._networks[f"dec2_{i}"].parameters() + self._networks[f"dec1_{i}"].parameters()
        return params

    def parameter_count(self) -> int:
        return sum(p.data.size for p in self.parameters())

    def layer_dims(self) -> Dict[str, list[int]]:
        return {name: net.dims() for name, net in self._networks.items()}

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: param.data.copy() for name, param in self.named_parameters()}

    def load_state_dict(self, state: Mapping[str, np.ndarray]) -> None:
        params = dict(self.named_parameters())
        if set(state) != set(params):
            raise ShapeError("state does not name the same parameters as the model")
        for name, param in params.items():
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != param.shape:
                raise ShapeError(f"{name}: stored shape {value.shape}, model shape {param.shape}")
            param.data = value.copy()

    def clone(self) -> "ProductAeModel":
        copy = ProductAeModel.initialize(self.spec, np.random.default_rng(0))
        copy.load_state_dict(self.state_dict())
        return copy

    # -- forward passes -----------------------------------------------------

    def encode(self, bits: np.ndarray) -> Tensor:
        """(B, k1·k2) message bits → (B, n1·n2) unit-power codewords, laid out as (n1, n2)."""
        spec = self.spec
        bits = np.asarray(bits)
        if bits.ndim != 2 or bits.shape[1] != spec.k:
            raise ShapeError(f"encoder expects (B, {spec.k}) message bits, got {bits.shape}")
        batch = bits.shape[0]
        u = as_tensor(bits_to_symbols(bits).reshape(batch, spec.k2, spec.k1))
        c1 = self._networks["enc1"](u)
        if spec.normalize_after_first_encoder:
            c1 = c1.reshape(batch, spec.k2 * spec.n1).power_normalize().reshape(batch, spec.k2, spec.n1)
        c = self._networks["enc2"](c1.permute(0, 2, 1))
        return c.reshape(batch, spec.n).power_normalize()

    def decode(self, y: Union[Tensor, np.ndarray]) -> Tensor:
        """(B, n1·n2) channel output → (B, k1·k2) logits."""
        spec = self.spec
        n1, n2, f, last = spec.n1, spec.n2, spec.features, spec.iterations
        y = as_tensor(y)
        if y.ndim != 2 or y.shape[1] != spec.n:
            raise ShapeError(f"decoder expects (B, {spec.n}) observations, got {y.shape}")
        batch = y.shape[0]
        observed = y.reshape(batch, n1, n2)
        soft_in = observed
        increment: Optional[Tensor] = None
        for i in range(1, last):
            d2_out = self._networks[f"dec2_{i}"](soft_in)
            if increment is not None:
                d2_out = d2_out - increment
            y2 = d2_out.reshape(batch, f * n1, n2)
            d1_in = concatenate([observed, y2], axis=1).permute(0, 2, 1)
            y1 = self._networks[f"dec1_{i}"](d1_in).permute(0, 2, 1)
            increment = (y1 - y2).reshape(batch, n1, f * n2)
            soft_in = concatenate([observed, increment], axis=2)
        final = self._networks[f"dec2_{last}"](soft_in).reshape(batch, f * n1, spec.k2)
        logits = self._networks[f"dec1_{last}"](final.permute(0, 2, 1))
        return logits.reshape(batch, spec.k)


def encode(bits: np.ndarray, model: ProductAeModel) -> Tensor:
    return model.encode(bits)


def decode(y: Union[Tensor, np.ndarray], model: ProductAeModel) -> Tensor:
    return model.decode(y)


class NeuralCodec:
    """Inference-only adapter putting a trained model behind the sweep interface."""

    def __init__(self, model: ProductAeModel, name: str = "productae") -> None:
        self._model = model
        self._name = name

    @property
    def name(self) -> str:
        return self._name

    @property
    def k(self) -> int:
        return self._model.spec.k

    @property
    def n(self) -> int:
        return self._model.spec.n

    @property
    def model(self) -> ProductAeModel:
        return self._model

    def encode(self, bits: np.ndarray) -> np.ndarray:
        with no_grad():
            return self._model.encode(bits).data

    def decode(self, observations: np.ndarray, noise_std: np.ndarray) -> np.ndarray:
        # the decoder networks see only the channel output
        with no_grad():
            return hard_decision(self._model.decode(observations))


# -- presets ----------------------------------------------------------------


def full_preset(n1: int, k1: int, n2: int, k2: int) -> ProductAeSpec:
    """I = 4, F = 3, seven hidden layers (nine in the last decoder pair), widths 200/250."""
    return ProductAeSpec(n1=n1, k1=k1, n2=n2, k2=k2)


def reduced_preset(n1: int, k1: int, n2: int, k2: int, *, size: str = "small") -> ProductAeSpec:
    """Lighter networks: `small` is 5/5/7 layers of 100/150/150, `medium` 6/6/8 of 150/200/200."""
    layouts = {"small": (5, 5, 7, 100, 150, 150), "medium": (6, 6, 8, 150, 200, 200)}
    if size not in layouts:
        raise ValueError(f"unknown preset size {size!r}; choose from {sorted(layouts)}")
    l_enc, l_dec, l_last, w_enc, w_dec, w_last = layouts[size]
    return ProductAeSpec(
        n1=n1,
        k1=k1,
        n2=n2,
        k2=k2,
        encoder1=NetShape(hidden_layers=l_enc, hidden_width=w_enc),
        encoder2=NetShape(hidden_layers=l_enc, hidden_width=w_enc),
        decoder=NetShape(hidden_layers=l_dec, hidden_width=w_dec),
        last_decoder=NetShape(hidden_layers=l_last, hidden_width=w_last),
    )


def desk_preset(n1: int = 4, k1: int = 2, n2: int = 4, k2: int = 2) -> ProductAeSpec:
    """Smoke-test scale: I = 2, F = 2, three hidden layers of 32 everywhere."""
    small = NetShape(hidden_layers=3, hidden_width=32)
    return ProductAeSpec(
        n1=n1,
        k1=k1,
        n2=n2,
        k2=k2,
        iterations=2,
        features=2,
        encoder1=small,
        encoder2=small,
        decoder=small,
        last_decoder=None,
    )


def shallow_variant(spec: ProductAeSpec, beta: int) -> ProductAeSpec:
    """Divide hidden-layer counts by `beta` and widen layers by ⌈√beta⌉."""
    if beta < 1:
        raise ValueError("beta must be a positive integer")
    widen = math.ceil(math.sqrt(beta))

    def thin(shape: NetShape) -> NetShape:
        return NetShape(hidden_layers=max(1, shape.hidden_layers // beta), hidden_width=shape.hidden_width * widen)

    return spec.model_copy(
        update={
            "encoder1": thin(spec.encoder1),
            "encoder2": thin(spec.encoder2),
            "decoder": thin(spec.decoder),
            "last_decoder": None if spec.last_decoder is None else thin(spec.last_decoder),
        }
    )
