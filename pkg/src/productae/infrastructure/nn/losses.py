"""Training losses."""
from __future__ import annotations

from typing import Iterable, Union

import numpy as np
from scipy.special import expit

from productae.domain.errors import DegenerateInputError, ShapeError

from .tensor import Parameter, Tensor, add, as_tensor, sum_squares


def bce_with_logits(logits: Union[Tensor, np.ndarray], targets: np.ndarray) -> Tensor:
    """Mean binary cross-entropy, computed as softplus(z) − u·z."""
    logits = as_tensor(logits)
    targets = np.asarray(targets, dtype=np.float64)
    if logits.shape != targets.shape:
        raise ShapeError(f"logits {logits.shape} and targets {targets.shape} differ in shape")
    if not np.all((targets == 0.0) | (targets == 1.0)):
        raise DegenerateInputError("loss targets must be binary")
    z = logits.data
    per_element = np.logaddexp(0.0, z) - targets * z
    size = z.size

    def backward(g: np.ndarray):
        return (float(g) * (expit(z) - targets) / size,)

    return Tensor._result(np.asarray(per_element.mean()), (logits,), backward)


def l2_penalty(params: Iterable[Parameter]) -> Tensor:
    """Sum of squared entries over weight matrices (biases are not penalized)."""
    terms = [sum_squares(p) for p in params if p.ndim == 2]
    if not terms:
        return Tensor(0.0)
    out = terms[0]
    for term in terms[1:]:
        out = add(out, term)
    return out
