"""Fully-connected layers and SELU multilayer perceptrons."""
from __future__ import annotations

import math
from typing import Iterator, Sequence, Union

import numpy as np

from productae.domain.errors import ShapeError

from .tensor import SELU_ALPHA, SELU_LAMBDA, Parameter, Tensor, as_tensor, dense


def selu(x: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """λ·x for x > 0, λ·α·(eˣ − 1) otherwise."""
    values = np.asarray(x, dtype=np.float64)
    out = SELU_LAMBDA * np.where(values > 0, values, SELU_ALPHA * np.expm1(np.minimum(values, 0.0)))
    return float(out) if out.ndim == 0 else out


class DenseLayer:
    """Affine map `x @ W.T + b` with W of shape (out_dim, in_dim)."""

    def __init__(self, weight: np.ndarray, bias: np.ndarray, name: str = "dense") -> None:
        weight = np.asarray(weight, dtype=np.float64)
        bias = np.asarray(bias, dtype=np.float64)
        if weight.ndim != 2 or bias.shape != (weight.shape[0],):
            raise ShapeError(f"{name}: weight {weight.shape} and bias {bias.shape} do not form a layer")
        self.name = name
        self.weight = Parameter(weight, name=f"{name}.weight")
        self.bias = Parameter(bias, name=f"{name}.bias")

    @classmethod
    def initialize(cls, in_dim: int, out_dim: int, rng: np.random.Generator, name: str = "dense") -> "DenseLayer":
        bound = math.sqrt(1.0 / in_dim)
        weight = rng.uniform(-bound, bound, size=(out_dim, in_dim))
        return cls(weight, np.zeros(out_dim), name=name)

    @property
    def in_dim(self) -> int:
        return self.weight.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[0]

    def parameters(self) -> list[Parameter]:
        return [self.weight, self.bias]

    def __call__(self, x: Union[Tensor, np.ndarray]) -> Tensor:
        x = as_tensor(x)
        if x.shape[-1] != self.in_dim:
            raise ShapeError(f"{self.name} expects trailing axis {self.in_dim}, got input of shape {x.shape}")
        return dense(x, self.weight, self.bias)


class Mlp:
    """Dense layers chained with SELU between them; the output layer stays affine."""

    def __init__(self, layers: Sequence[DenseLayer], name: str = "mlp") -> None:
        if not layers:
            raise ShapeError(f"{name} needs at least one layer")
        for before, after in zip(layers, layers[1:]):
            if before.out_dim != after.in_dim:
                raise ShapeError(
                    f"{name}: {before.name} emits {before.out_dim} values but {after.name} takes {after.in_dim}"
                )
        self.name = name
        self.layers = list(layers)

    @classmethod
    def build(
        cls,
        name: str,
        in_dim: int,
        out_dim: int,
        hidden_layers: int,
        hidden_width: int,
        rng: np.random.Generator,
    ) -> "Mlp":
        dims = [in_dim, *([hidden_width] * hidden_layers), out_dim]
        layers = [
            DenseLayer.initialize(d_in, d_out, rng, name=f"{name}.{index}")
            for index, (d_in, d_out) in enumerate(zip(dims, dims[1:]))
        ]
        return cls(layers, name=name)

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    @property
    def hidden_count(self) -> int:
        return len(self.layers) - 1

    def dims(self) -> list[int]:
        return [self.in_dim, *(layer.out_dim for layer in self.layers)]

    def parameters(self) -> list[Parameter]:
        return [param for layer in self.layers for param in layer.parameters()]

    def named_parameters(self) -> Iterator[tuple[str, Parameter]]:
        for param in self.parameters():
            yield param.name, param

    def parameter_count(self) -> int:
        return sum(param.data.size for param in self.parameters())

    def __call__(self, x: Union[Tensor, np.ndarray]) -> Tensor:
        out = as_tensor(x)
        last = len(self.layers) - 1
        for index, layer in enumerate(self.layers):
            out = layer(out)
            if index < last:
                out = out.selu()
        return out


def mlp_forward(net: Mlp, batch: Union[Tensor, np.ndarray]) -> Tensor:
    """Apply `net` over the trailing axis of `batch`; leading axes are kept."""
    return net(batch)
