"""Dense float64 tensors with reverse-mode differentiation.

Only the primitives the product autoencoder needs are provided: affine maps,
SELU, reshape/permute/concatenate, elementwise arithmetic (for subtraction
and the channel), per-row power normalization and reductions. Every array is
row-major float64.
"""
from __future__ import annotations

import threading
from contextlib import contextmanager
from typing import Callable, Iterable, Iterator, Optional, Sequence, Union

import numpy as np

from productae.domain.errors import DegenerateInputError, GraphUsageError, ShapeError

SELU_LAMBDA = 1.0507009873554805
SELU_ALPHA = 1.6732632423543772

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]
Operand = Union["Tensor", np.ndarray, float, int]

_grad_mode = threading.local()


def is_grad_enabled() -> bool:
    return getattr(_grad_mode, "enabled", True)


@contextmanager
def no_grad() -> Iterator[None]:
    """Disable graph recording on the current thread."""
    previous = is_grad_enabled()
    _grad_mode.enabled = False
    try:
        yield
    finally:
        _grad_mode.enabled = previous


class Tensor:
    """A float64 array that remembers how it was computed."""

    # make numpy hand mixed expressions (ndarray + Tensor) to our reflected operators
    __array_ufunc__ = None

    def __init__(self, data: Union[np.ndarray, float, Sequence], *, requires_grad: bool = False) -> None:
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Optional[BackwardFn] = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    @staticmethod
    def _result(data: np.ndarray, parents: Sequence["Tensor"], backward: BackwardFn) -> "Tensor":
        out = Tensor(data)
        if is_grad_enabled() and any(parent.requires_grad for parent in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._backward = backward
        return out

    # -- reverse pass -------------------------------------------------------

    def backward(self) -> None:
        """Accumulate d(self)/d(leaf) into the `.grad` of every leaf that requires it."""
        if self.data.size != 1:
            raise GraphUsageError(f"backward() needs a scalar, got shape {self.shape}")
        if self._backward is None:
            raise GraphUsageError("backward() called before any recorded forward computation")
        grads: dict[int, np.ndarray] = {id(self): np.ones_like(self.data)}
        for node in reversed(self._topological_order()):
            grad = grads.pop(id(node), None)
            if grad is None:
                continue
            if node._backward is None:
                node.grad = grad.copy() if node.grad is None else node.grad + grad
                continue
            for parent, parent_grad in zip(node._parents, node._backward(grad)):
                if parent_grad is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = grads[key] + parent_grad if key in grads else parent_grad

    def _topological_order(self) -> list["Tensor"]:
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in seen:
                    stack.append((parent, False))
        return order

    # -- operators ----------------------------------------------------------

    def __add__(self, other: Operand) -> "Tensor":
        return add(self, other)

    def __radd__(self, other: Operand) -> "Tensor":
        return add(other, self)

    def __sub__(self, other: Operand) -> "Tensor":
        return sub(self, other)

    def __rsub__(self, other: Operand) -> "Tensor":
        return sub(other, self)

    def __mul__(self, other: Operand) -> "Tensor":
        return mul(self, other)

    def __rmul__(self, other: Operand) -> "Tensor":
        return mul(other, self)

    def __truediv__(self, other: float) -> "Tensor":
        return mul(self, 1.0 / other)

    def __neg__(self) -> "Tensor":
        return mul(self, -1.0)

    def reshape(self, *shape: int) -> "Tensor":
        return reshape(self, shape)

    def permute(self, *axes: int) -> "Tensor":
        return permute(self, axes)

    def selu(self) -> "Tensor":
        return selu(self)

    def sum(self) -> "Tensor":
        return total(self)

    def mean(self) -> "Tensor":
        return mean(self)

    def power_normalize(self) -> "Tensor":
        return power_normalize(self)


class Parameter(Tensor):
    """A trainable leaf tensor owning its storage."""

    def __init__(self, data: np.ndarray, name: str = "") -> None:
        super().__init__(np.array(data, dtype=np.float64, copy=True), requires_grad=True)
        self.name = name

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.shape})"

    def zero_grad(self) -> None:
        self.grad = None


@contextmanager
def freeze(params: Iterable[Parameter]) -> Iterator[None]:
    """Temporarily stop recording gradients for `params` (inputs still propagate)."""
    frozen = [p for p in params if p.requires_grad]
    for param in frozen:
        param.requires_grad = False
    try:
        yield
    finally:
        for param in frozen:
            param.requires_grad = True


def as_tensor(value: Operand) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def add(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def backward(g: np.ndarray):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return Tensor._result(a.data + b.data, (a, b), backward)


def sub(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def backward(g: np.ndarray):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return Tensor._result(a.data - b.data, (a, b), backward)


def mul(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def backward(g: np.ndarray):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return Tensor._result(a.data * b.data, (a, b), backward)


def dense(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """x @ weight.T + bias over the trailing axis; leading axes are batch axes."""
    if x.shape[-1] != weight.shape[1]:
        raise ShapeError(f"affine map expects trailing axis {weight.shape[1]}, got {x.shape}")

    def backward(g: np.ndarray):
        flat_g = g.reshape(-1, g.shape[-1])
        flat_x = x.data.reshape(-1, x.shape[-1])
        return g @ weight.data, flat_g.T @ flat_x, flat_g.sum(axis=0)

    return Tensor._result(x.data @ weight.data.T + bias.data, (x, weight, bias), backward)


def selu(x: Tensor) -> Tensor:
    positive = x.data > 0
    negative_part = np.minimum(x.data, 0.0)
    out = SELU_LAMBDA * np.where(positive, x.data, SELU_ALPHA * np.expm1(negative_part))

    def backward(g: np.ndarray):
        slope = np.where(positive, 1.0, SELU_ALPHA * np.exp(negative_part))
        return (g * SELU_LAMBDA * slope,)

    return Tensor._result(out, (x,), backward)


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    original = x.shape

    def backward(g: np.ndarray):
        return (g.reshape(original),)

    try:
        data = x.data.reshape(tuple(shape))
    except ValueError as exc:
        raise ShapeError(f"cannot reshape {original} to {tuple(shape)}") from exc
    return Tensor._result(data, (x,), backward)


def permute(x: Tensor, axes: Sequence[int]) -> Tensor:
    axes = tuple(axes)
    if sorted(axes) != list(range(x.ndim)):
        raise ShapeError(f"{axes} is not a permutation of the axes of a {x.ndim}-d tensor")
    inverse = tuple(np.argsort(axes))

    def backward(g: np.ndarray):
        return (np.transpose(g, inverse),)

    return Tensor._result(np.transpose(x.data, axes), (x,), backward)


def concatenate(tensors: Sequence[Tensor], axis: int) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    try:
        data = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        raise ShapeError(f"cannot concatenate {[t.shape for t in tensors]} on axis {axis}") from exc
    cuts = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g: np.ndarray):
        return tuple(np.split(g, cuts, axis=axis))

    return Tensor._result(data, tensors, backward)


def total(x: Tensor) -> Tensor:
    def backward(g: np.ndarray):
        return (np.full(x.shape, float(g)),)

    return Tensor._result(np.asarray(x.data.sum()), (x,), backward)


def mean(x: Tensor) -> Tensor:
    size = x.data.size

    def backward(g: np.ndarray):
        return (np.full(x.shape, float(g) / size),)

    return Tensor._result(np.asarray(x.data.mean()), (x,), backward)


def sum_squares(x: Tensor) -> Tensor:
    def backward(g: np.ndarray):
        return (2.0 * float(g) * x.data,)

    return Tensor._result(np.asarray(np.sum(x.data * x.data)), (x,), backward)


def power_normalize(x: Tensor) -> Tensor:
    """Scale every vector along the trailing axis to squared norm equal to its length."""
    norms = np.sqrt(np.sum(x.data * x.data, axis=-1, keepdims=True))
    if np.any(norms == 0):
        raise DegenerateInputError("cannot power-normalize a zero vector")
    scale = np.sqrt(x.shape[-1])

    def backward(g: np.ndarray):
        along = np.sum(x.data * g, axis=-1, keepdims=True)
        return (scale / norms * (g - x.data * along / norms**2),)

    return Tensor._result(scale * x.data / norms, (x,), backward)
