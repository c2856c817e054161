from __future__ import annotations

import numpy as np
import pytest
from scipy import stats

from productae.domain.entities import ChannelKind, PointSnr, RangeSnr
from productae.infrastructure.nn.tensor import Parameter
from productae.infrastructure.services.channel import (
    LLR_LIMIT,
    awgn_transmit,
    llr_awgn,
    rayleigh_transmit,
    sample_realization,
    snr_db_to_sigma,
)
from productae.infrastructure.services.random_streams import random_bits, stream, stream_entropy


def test_sigma_from_snr() -> None:
    assert snr_db_to_sigma(0.0) == pytest.approx(1.0)
    assert snr_db_to_sigma(20.0) == pytest.approx(0.1)


def test_awgn_noise_variance() -> None:
    rng = np.random.default_rng(0)
    codewords = np.zeros((1000, 1000))
    noise = awgn_transmit(codewords, PointSnr(db=3.0), rng)
    expected = snr_db_to_sigma(3.0) ** 2
    assert abs(noise.var() / expected - 1.0) < 0.01


def test_rayleigh_power_is_unit() -> None:
    realization = sample_realization(ChannelKind.RAYLEIGH, PointSnr(db=0.0), (1000, 1000), np.random.default_rng(1))
    assert realization.gain is not None
    assert abs(np.mean(realization.gain**2) - 1.0) < 0.01
    assert np.all(realization.gain >= 0)


def test_rayleigh_amplitudes_follow_the_unit_power_distribution() -> None:
    realization = sample_realization(ChannelKind.RAYLEIGH, PointSnr(db=0.0), (1000, 1000), np.random.default_rng(7))
    # CDF 1 - exp(-a^2)
    result = stats.kstest(realization.gain.ravel(), stats.rayleigh(scale=np.sqrt(0.5)).cdf)
    assert result.statistic < 0.005


def test_awgn_noise_is_uncorrelated_with_the_codeword() -> None:
    rng = np.random.default_rng(8)
    codewords = rng.choice([-1.0, 1.0], size=(1000, 1000))
    noise = awgn_transmit(codewords, PointSnr(db=0.0), rng) - codewords
    correlation = np.corrcoef(codewords.ravel(), noise.ravel())[0, 1]
    assert abs(correlation) < 5 / np.sqrt(codewords.size)


def test_rayleigh_with_huge_snr_is_pure_fading() -> None:
    rng = np.random.default_rng(2)
    y = rayleigh_transmit(np.ones((4, 8)), PointSnr(db=300.0), rng)
    assert np.all(y > 0)


def test_range_policy_draws_uniform_snrs() -> None:
    realization = sample_realization(ChannelKind.AWGN, RangeSnr(lo=-1.25, hi=2.25), (100_000, 2), np.random.default_rng(3))
    result = stats.kstest(realization.snr_db, stats.uniform(loc=-1.25, scale=3.5).cdf)
    assert result.pvalue > 0.01
    expected_std = snr_db_to_sigma(realization.snr_db).reshape(-1, 1)
    assert np.allclose(realization.noise_std, expected_std)


def test_point_and_degenerate_range_consume_identical_streams() -> None:
    point = sample_realization(ChannelKind.RAYLEIGH, PointSnr(db=1.5), (8, 6), stream(4, "t"))
    degenerate = sample_realization(ChannelKind.RAYLEIGH, RangeSnr(lo=1.5, hi=1.5), (8, 6), stream(4, "t"))
    assert np.array_equal(point.noise, degenerate.noise)
    assert np.array_equal(point.gain, degenerate.gain)
    assert np.array_equal(point.noise_std, degenerate.noise_std)


def test_sliced_realization_applies_the_same_noise() -> None:
    realization = sample_realization(ChannelKind.AWGN, RangeSnr(lo=0.0, hi=2.0), (10, 3), np.random.default_rng(5))
    codewords = np.ones((10, 3))
    whole = realization.apply(codewords)
    assert np.array_equal(realization.take(slice(4, 8)).apply(codewords[4:8]), whole[4:8])


def test_channel_passes_gradients_through_tensors() -> None:
    codewords = Parameter(np.ones((2, 3)))
    realization = sample_realization(ChannelKind.RAYLEIGH, PointSnr(db=0.0), (2, 3), np.random.default_rng(6))
    realization.apply(codewords).sum().backward()
    assert np.allclose(codewords.grad, realization.gain)


def test_llr_sign_convention_and_clipping() -> None:
    llr = llr_awgn(np.array([[1.0, -0.5, 0.0]]), 1.0)
    assert np.allclose(llr, [[2.0, -1.0, 0.0]])
    assert np.all(np.abs(llr_awgn(np.array([1e9, -1e9]), 1e-3)) == LLR_LIMIT)


def test_streams_are_independent_of_siblings() -> None:
    first = stream(9, "sweep", 1.0, 0).standard_normal(4)
    again = stream(9, "sweep", 1.0, 0).standard_normal(4)
    other = stream(9, "sweep", 1.0, 1).standard_normal(4)
    assert np.array_equal(first, again)
    assert not np.array_equal(first, other)
    assert stream_entropy(9, "a") != stream_entropy(10, "a")


def test_random_bits_are_binary_uint8() -> None:
    bits = random_bits(np.random.default_rng(0), 5, 7)
    assert bits.dtype == np.uint8 and bits.shape == (5, 7)
    assert set(np.unique(bits)) <= {0, 1}
