from __future__ import annotations

from pathlib import Path
from typing import Callable, Iterable, Iterator, Optional

import numpy as np
import pytest

from productae.domain.entities import PointSnr, RangeSnr, TrainConfig, ValidationPlan
from productae.infrastructure.database.sqlite_repository import SQLAlchemyResultRepository
from productae.infrastructure.nn.tensor import Parameter, Tensor
from productae.infrastructure.services.neural_codec import ProductAeModel, desk_preset

FD_STEP = 1e-5


def finite_difference(
    loss_fn: Callable[[], Tensor],
    param: Parameter,
    h: float = FD_STEP,
    indices: Optional[Iterable[tuple[int, ...]]] = None,
) -> np.ndarray:
    """Central differences of a scalar loss with respect to `param` (every entry unless `indices` is given)."""
    grad = np.zeros_like(param.data)
    for index in np.ndindex(param.shape) if indices is None else indices:
        original = param.data[index]
        param.data[index] = original + h
        upper = loss_fn().item()
        param.data[index] = original - h
        lower = loss_fn().item()
        param.data[index] = original
        grad[index] = (upper - lower) / (2 * h)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    scale = max(np.max(np.abs(analytic)), np.max(np.abs(numeric)), 1e-8)
    return float(np.max(np.abs(analytic - numeric)) / scale)


@pytest.fixture()
def temp_db_path(tmp_path: Path) -> Iterator[Path]:
    db_path = tmp_path / "productae.db"
    yield db_path
    if db_path.exists():
        db_path.unlink()


@pytest.fixture()
def repository(temp_db_path: Path):
    repo = SQLAlchemyResultRepository(temp_db_path)
    try:
        yield repo
    finally:
        repo.dispose()


@pytest.fixture()
def tiny_model() -> ProductAeModel:
    return ProductAeModel.initialize(desk_preset(), np.random.default_rng(7))


@pytest.fixture()
def tiny_config() -> TrainConfig:
    return TrainConfig(
        epochs=1,
        batch_size=16,
        enc_iterations=2,
        dec_iterations=3,
        encoder_snr=PointSnr(db=2.0),
        decoder_snr=RangeSnr(lo=-0.5, hi=3.0),
        lr_enc=1e-3,
        lr_dec=1e-3,
        validation=ValidationPlan(snrs=[1.0, 3.0], words=64, chunk_size=32),
        seed=11,
    )


@pytest.fixture()
def numeric_gradient() -> Callable[..., np.ndarray]:
    return finite_difference


@pytest.fixture()
def gradient_error() -> Callable[[np.ndarray, np.ndarray], float]:
    return relative_error
