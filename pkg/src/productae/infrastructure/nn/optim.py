"""Adam and gradient accumulation over sub-batches."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

import numpy as np

from productae.domain.errors import ConfigurationError, NonFiniteGradientError, ShapeError

from .tensor import Parameter, Tensor

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AdamState:
    """First/second moment estimates and the applied-step counters.

    `step_count` counts optimizer steps on this side; `param_steps` counts the
    updates each parameter actually received and drives its bias correction.
    An empty `param_steps` (a state read back from a checkpoint) is rebuilt
    from the moments: `step_count` where they are non-zero, 0 elsewhere.
    """

    first_moment: tuple[np.ndarray, ...]
    second_moment: tuple[np.ndarray, ...]
    step_count: int = 0
    lr: float = 2e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    param_steps: tuple[int, ...] = ()

    @classmethod
    def fresh(cls, shapes: Iterable[tuple[int, ...]], lr: float, **kwargs: float) -> "AdamState":
        shapes = list(shapes)
        return cls(
            first_moment=tuple(np.zeros(shape) for shape in shapes),
            second_moment=tuple(np.zeros(shape) for shape in shapes),
            lr=lr,
            param_steps=(0,) * len(shapes),
            **kwargs,
        )

    def updates_per_parameter(self) -> tuple[int, ...]:
        if len(self.param_steps) == len(self.first_moment):
            return self.param_steps
        return tuple(
            self.step_count if (np.any(m) or np.any(v)) else 0
            for m, v in zip(self.first_moment, self.second_moment)
        )


def adam_step(
    params: Sequence[np.ndarray],
    grads: Sequence[Optional[np.ndarray]],
    state: AdamState,
) -> tuple[list[np.ndarray], AdamState]:
    """One bias-corrected Adam update.

    Entries whose gradient is None are passed through untouched, moments included,
    so a step restricted to part of a model leaves the rest bit-identical.
    Bias correction uses each parameter's own update count, so a decoder pair
    first trained after another pair still starts with a step of size lr.
    """
    if not len(params) == len(grads) == len(state.first_moment):
        raise ShapeError("parameters, gradients and moments must line up one to one")
    for grad in grads:
        if grad is not None and not np.all(np.isfinite(grad)):
            raise NonFiniteGradientError("non-finite gradient reached the optimizer")
    new_params: list[np.ndarray] = []
    first: list[np.ndarray] = []
    second: list[np.ndarray] = []
    counts: list[int] = []
    done_steps = state.updates_per_parameter()
    for value, grad, m, v, done in zip(params, grads, state.first_moment, state.second_moment, done_steps):
        if grad is None:
            new_params.append(value)
            first.append(m)
            second.append(v)
            counts.append(done)
            continue
        if grad.shape != value.shape or m.shape != value.shape:
            raise ShapeError(f"gradient {grad.shape} does not match parameter {value.shape}")
        t = done + 1
        m = state.beta1 * m + (1.0 - state.beta1) * grad
        v = state.beta2 * v + (1.0 - state.beta2) * grad * grad
        update = (m / (1.0 - state.beta1**t)) / (np.sqrt(v / (1.0 - state.beta2**t)) + state.eps)
        new_params.append(value - state.lr * update)
        first.append(m)
        second.append(v)
        counts.append(t)
    return new_params, replace(
        state,
        first_moment=tuple(first),
        second_moment=tuple(second),
        step_count=state.step_count + 1,
        param_steps=tuple(counts),
    )


class AdamOptimizer:
    """Stateful Adam over a fixed, ordered list of parameters."""

    def __init__(
        self,
        params: Iterable[Parameter],
        lr: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ) -> None:
        self.params = list(params)
        self.state = AdamState.fresh((p.shape for p in self.params), lr, beta1=beta1, beta2=beta2, eps=eps)

    @property
    def steps(self) -> int:
        return self.state.step_count

    def zero_grad(self) -> None:
        for param in self.params:
            param.zero_grad()

    def step(self) -> None:
        grads = [p.grad for p in self.params]
        if all(grad is None for grad in grads):
            logger.debug("optimizer step skipped: no gradients recorded")
            return
        values, self.state = adam_step([p.data for p in self.params], grads, self.state)
        for param, value in zip(self.params, values):
            param.data = value

    def reset(self) -> None:
        """Forget the moment estimates and the step counter."""
        self.state = AdamState.fresh(
            (p.shape for p in self.params),
            self.state.lr,
            beta1=self.state.beta1,
            beta2=self.state.beta2,
            eps=self.state.eps,
        )

    def load_moments(self, first: Sequence[np.ndarray], second: Sequence[np.ndarray], step_count: int) -> None:
        if len(first) != len(self.params) or len(second) != len(self.params):
            raise ShapeError("moment list does not match the optimizer's parameters")
        for param, m, v in zip(self.params, first, second):
            if m.shape != param.shape or v.shape != param.shape:
                raise ShapeError(f"moment shape mismatch for {param.name}")
        self.state = replace(
            self.state,
            first_moment=tuple(np.array(m, dtype=np.float64) for m in first),
            second_moment=tuple(np.array(v, dtype=np.float64) for v in second),
            step_count=int(step_count),
            param_steps=(),
        )
        self.state = replace(self.state, param_steps=self.state.updates_per_parameter())


@dataclass
class GradientAccumulator:
    """Sums the gradients of L sub-batch losses, each scaled by 1/L, into the parameters' `.grad`."""

    params: list[Parameter]
    sub_batches: int
    sub_batch_size: int
    accumulated: int = field(default=0, init=False)

    def __post_init__(self) -> None:
        if self.sub_batches < 1 or self.sub_batch_size < 1:
            raise ConfigurationError("sub-batch count and size must be positive")

    def begin(self) -> None:
        for param in self.params:
            param.zero_grad()
        self.accumulated = 0

    def accumulate(self, loss: Tensor, batch_size: int) -> None:
        if batch_size != self.sub_batch_size:
            raise ConfigurationError(
                f"sub-batch of {batch_size} words in an accumulation of size {self.sub_batch_size}"
            )
        if self.accumulated >= self.sub_batches:
            raise ConfigurationError(f"more than {self.sub_batches} sub-batches accumulated")
        (loss * (1.0 / self.sub_batches)).backward()
        self.accumulated += 1

    def finish(self) -> None:
        if self.accumulated != self.sub_batches:
            raise ConfigurationError(
                f"accumulated {self.accumulated} of {self.sub_batches} sub-batches before stepping"
            )

    @property
    def gradients(self) -> list[Optional[np.ndarray]]:
        return [param.grad for param in self.params]


def accumulate_and_step(
    accumulator: GradientAccumulator,
    sub_batch_losses: Iterable[tuple[Tensor, int]],
    optimizer: AdamOptimizer,
) -> float:
    """Accumulate every (loss, batch size) pair, then apply a single optimizer step.

    Returns the mean of the sub-batch losses.
    """
    accumulator.begin()
    total = 0.0
    for loss, batch_size in sub_batch_losses:
        accumulator.accumulate(loss, batch_size)
        total += loss.item()
    accumulator.finish()
    optimizer.step()
    return total / accumulator.sub_batches
