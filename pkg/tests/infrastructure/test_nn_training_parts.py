from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from productae.domain.errors import ConfigurationError, DegenerateInputError, NonFiniteGradientError, ShapeError
from productae.infrastructure.nn.layers import DenseLayer, Mlp, mlp_forward, selu
from productae.infrastructure.nn.losses import bce_with_logits, l2_penalty
from productae.infrastructure.nn.optim import (
    AdamOptimizer,
    AdamState,
    GradientAccumulator,
    accumulate_and_step,
    adam_step,
)
from productae.infrastructure.nn.tensor import Parameter, Tensor, dense


def test_selu_reference_values() -> None:
    assert selu(0.0) == 0.0
    assert selu(1.0) == pytest.approx(1.0507009873554805)
    assert selu(-1.0) == pytest.approx(-1.1113307378125628)


def test_mlp_dims_and_canonical_parameter_order() -> None:
    net = Mlp.build("enc1", 3, 5, hidden_layers=2, hidden_width=8, rng=np.random.default_rng(0))
    assert net.dims() == [3, 8, 8, 5]
    assert net.hidden_count == 2
    assert [name for name, _ in net.named_parameters()] == [
        "enc1.0.weight",
        "enc1.0.bias",
        "enc1.1.weight",
        "enc1.1.bias",
        "enc1.2.weight",
        "enc1.2.bias",
    ]
    assert net.parameter_count() == 3 * 8 + 8 + 8 * 8 + 8 + 8 * 5 + 5


def test_mlp_without_hidden_layers_is_affine() -> None:
    weight = np.array([[1.0, 2.0], [0.0, -1.0], [3.0, 0.5]])
    bias = np.array([0.1, 0.2, 0.3])
    net = Mlp([DenseLayer(weight, bias)])
    x = np.array([[-2.0, 1.0], [4.0, 3.0]])
    assert np.allclose(mlp_forward(net, x).data, x @ weight.T + bias)


def test_mlp_applies_selu_between_layers_only() -> None:
    first = DenseLayer(np.array([[1.0]]), np.array([0.0]), name="a")
    second = DenseLayer(np.array([[1.0]]), np.array([0.0]), name="b")
    out = Mlp([first, second])(np.array([[-1.0]])).data
    assert out[0, 0] == pytest.approx(selu(-1.0))


def test_mlp_rejects_unchained_layers() -> None:
    rng = np.random.default_rng(0)
    with pytest.raises(ShapeError, match="emits"):
        Mlp([DenseLayer.initialize(2, 3, rng, "a"), DenseLayer.initialize(4, 1, rng, "b")])


def test_layer_shape_error_names_the_layer() -> None:
    layer = DenseLayer.initialize(3, 2, np.random.default_rng(0), name="dec1_2.0")
    with pytest.raises(ShapeError, match="dec1_2.0"):
        layer(np.ones((1, 4)))


def test_initialization_bounds() -> None:
    layer = DenseLayer.initialize(16, 4, np.random.default_rng(1))
    assert np.all(np.abs(layer.weight.data) <= 0.25)
    assert np.all(layer.bias.data == 0.0)


def test_bce_matches_naive_formula_on_moderate_logits() -> None:
    z = np.array([[-2.0, 0.0, 3.0], [0.5, -0.1, 1.0]])
    u = np.array([[0, 1, 1], [1, 0, 0]], dtype=np.float64)
    p = 1.0 / (1.0 + np.exp(-z))
    naive = -np.mean(u * np.log(p) + (1 - u) * np.log(1 - p))
    assert bce_with_logits(z, u).item() == pytest.approx(naive, rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (4, 3), elements=st.floats(-1e4, 1e4, allow_nan=False)))
def test_bce_is_finite_and_non_negative(z: np.ndarray) -> None:
    u = (np.arange(12).reshape(4, 3) % 2).astype(np.float64)
    loss = bce_with_logits(z, u).item()
    assert np.isfinite(loss) and loss >= 0.0


def test_bce_gradient(numeric_gradient, gradient_error) -> None:
    rng = np.random.default_rng(4)
    logits = Parameter(rng.normal(size=(5, 4)) * 3.0, name="z")
    targets = rng.integers(0, 2, size=(5, 4))

    def loss() -> Tensor:
        return bce_with_logits(logits, targets)

    loss().backward()
    assert gradient_error(logits.grad, numeric_gradient(loss, logits)) < 1e-6


def test_bce_validation() -> None:
    with pytest.raises(ShapeError):
        bce_with_logits(np.zeros((2, 2)), np.zeros((2, 3)))
    with pytest.raises(DegenerateInputError):
        bce_with_logits(np.zeros((1, 2)), np.array([[0.0, 0.5]]))


def test_l2_penalty_covers_weight_matrices_only() -> None:
    layer = DenseLayer(np.array([[1.0, 2.0]]), np.array([5.0]))
    assert l2_penalty(layer.parameters()).item() == pytest.approx(5.0)


def test_adam_first_step_moves_each_entry_by_learning_rate() -> None:
    state = AdamState.fresh([(3,)], lr=0.01)
    params, new_state = adam_step([np.zeros(3)], [np.array([2.0, -0.5, 1e-3])], state)
    assert np.allclose(params[0], [-0.01, 0.01, -0.01], rtol=1e-4)
    assert new_state.step_count == 1


def test_adam_skips_missing_gradients_bit_exactly() -> None:
    state = AdamState.fresh([(2,), (2,)], lr=0.1)
    untouched = np.array([1.0, 2.0])
    params, new_state = adam_step([np.zeros(2), untouched], [np.ones(2), None], state)
    assert params[1] is untouched
    assert np.array_equal(new_state.first_moment[1], np.zeros(2))


def test_adam_bias_correction_follows_each_parameters_own_updates() -> None:
    state = AdamState.fresh([(2,), (2,)], lr=0.01)
    params = [np.zeros(2), np.zeros(2)]
    for _ in range(4):
        params, state = adam_step(params, [np.array([1.0, -1.0]), None], state)
    assert state.step_count == 4 and state.param_steps == (4, 0)
    params, state = adam_step(params, [None, np.array([3.0, -0.2])], state)
    assert np.allclose(params[1], [-0.01, 0.01], rtol=1e-5)
    assert state.param_steps == (4, 1)


def test_loaded_moments_recover_per_parameter_counts() -> None:
    first, second = (np.ones(2), np.zeros(2)), (np.ones(2), np.zeros(2))
    optimizer = AdamOptimizer([Parameter(np.ones(2)), Parameter(np.ones(2))], lr=0.1)
    optimizer.load_moments(first, second, 7)
    assert optimizer.state.param_steps == (7, 0)
    restored = AdamState(first_moment=first, second_moment=second, step_count=7)
    assert restored.updates_per_parameter() == (7, 0)


def test_adam_rejects_non_finite_gradient() -> None:
    state = AdamState.fresh([(1,)], lr=0.1)
    with pytest.raises(NonFiniteGradientError):
        adam_step([np.zeros(1)], [np.array([np.nan])], state)


def test_optimizer_reset_and_moment_loading() -> None:
    param = Parameter(np.ones(2), name="p")
    optimizer = AdamOptimizer([param], lr=0.1)
    param.grad = np.array([1.0, -1.0])
    optimizer.step()
    assert optimizer.steps == 1
    snapshot = optimizer.state
    optimizer.reset()
    assert optimizer.steps == 0
    assert np.array_equal(optimizer.state.first_moment[0], np.zeros(2))
    optimizer.load_moments(snapshot.first_moment, snapshot.second_moment, snapshot.step_count)
    assert optimizer.steps == 1
    with pytest.raises(ShapeError):
        optimizer.load_moments([np.zeros(3)], [np.zeros(3)], 1)


def test_optimizer_without_gradients_does_not_step() -> None:
    optimizer = AdamOptimizer([Parameter(np.ones(2))], lr=0.1)
    optimizer.step()
    assert optimizer.steps == 0


def _linear_problem(seed: int = 5) -> tuple[Parameter, np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    weight = Parameter(rng.normal(size=(3, 4)), name="w")
    x = rng.normal(size=(64, 4))
    targets = rng.integers(0, 2, size=(64, 3))
    return weight, x, targets


def _batch_loss(weight: Parameter, x: np.ndarray, targets: np.ndarray) -> Tensor:
    return bce_with_logits(dense(Tensor(x), weight, Tensor(np.zeros(3))), targets)


def test_accumulated_step_equals_direct_batch_step() -> None:
    direct_weight, x, targets = _linear_problem()
    accumulated_weight, _, _ = _linear_problem()

    direct = AdamOptimizer([direct_weight], lr=1e-2)
    accumulate_and_step(GradientAccumulator([direct_weight], 1, 64), [(_batch_loss(direct_weight, x, targets), 64)], direct)

    split = AdamOptimizer([accumulated_weight], lr=1e-2)
    losses = (
        (_batch_loss(accumulated_weight, x[i * 8 : (i + 1) * 8], targets[i * 8 : (i + 1) * 8]), 8) for i in range(8)
    )
    accumulate_and_step(GradientAccumulator([accumulated_weight], 8, 8), losses, split)

    relative = np.abs(direct_weight.data - accumulated_weight.data) / np.maximum(np.abs(direct_weight.data), 1e-12)
    assert np.max(relative) < 1e-10


def test_accumulator_enforces_its_plan() -> None:
    weight, x, targets = _linear_problem()
    accumulator = GradientAccumulator([weight], 2, 8)
    accumulator.begin()
    with pytest.raises(ConfigurationError):
        accumulator.accumulate(_batch_loss(weight, x[:4], targets[:4]), 4)
    accumulator.accumulate(_batch_loss(weight, x[:8], targets[:8]), 8)
    with pytest.raises(ConfigurationError):
        accumulator.finish()
    with pytest.raises(ConfigurationError):
        GradientAccumulator([weight], 0, 8)
