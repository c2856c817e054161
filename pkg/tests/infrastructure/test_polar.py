from __future__ import annotations

import numpy as np
import pytest

from productae.application.use_cases.evaluate import count_errors
from productae.domain.entities import ChannelKind, PointSnr, PolarSpec
from productae.domain.errors import ConfigurationError, ShapeError
from productae.infrastructure.services.channel import llr_awgn, sample_realization
from productae.infrastructure.services.linear_codes import gf2_matmul
from productae.infrastructure.services.ml_decoder import MlCodec, enumerate_messages
from productae.infrastructure.services.polar import (
    PolarCodec,
    bhattacharyya_order,
    bhattacharyya_parameters,
    depuncture,
    estimate_bit_channel_ber,
    generator_matrix,
    mother_length,
    polar_construct,
    polar_encode,
    polar_encode_bits,
    polar_sc_decode,
    polar_transform,
    random_puncture,
)
from productae.infrastructure.services.random_streams import random_bits


def make_spec(big_n: int, k: int, design_snr_db: float = 0.0) -> PolarSpec:
    info_set = sorted(bhattacharyya_order(big_n, design_snr_db)[:k])
    return PolarSpec(mother_length=big_n, length=big_n, dimension=k, info_set=info_set)


def test_mother_length() -> None:
    assert [mother_length(n) for n in (1, 2, 3, 8, 9, 300)] == [1, 2, 4, 8, 16, 512]


def test_transform_matches_kronecker_power() -> None:
    u = np.random.default_rng(0).integers(0, 2, size=(20, 16)).astype(np.uint8)
    assert np.array_equal(polar_transform(u), gf2_matmul(u, generator_matrix(16)))
    assert np.array_equal(polar_transform(polar_transform(u)), u)
    with pytest.raises(ShapeError):
        polar_transform(np.zeros((1, 6), dtype=np.uint8))


def test_bhattacharyya_information_set_for_length_eight() -> None:
    assert sorted(bhattacharyya_order(8, 0.0)[:4]) == [3, 5, 6, 7]
    z = bhattacharyya_parameters(8, 0.0)
    assert z[7] == pytest.approx(np.exp(-1.0) ** 8)
    assert np.all((z > 0) & (z < 1))


@pytest.mark.parametrize(("big_n", "k"), [(8, 4), (16, 8)])
def test_noiseless_round_trip(big_n: int, k: int) -> None:
    codec = PolarCodec(make_spec(big_n, k))
    bits = enumerate_messages(k)
    noise_std = np.full((bits.shape[0], 1), 0.5)
    assert np.array_equal(codec.decode(codec.encode(bits), noise_std), bits)


def test_single_word_decoding_keeps_its_rank() -> None:
    spec = make_spec(8, 4)
    bits = np.array([1, 0, 1, 1], dtype=np.uint8)
    symbols = polar_encode(bits, spec)
    assert symbols.shape == (8,)
    assert polar_sc_decode(llr_awgn(symbols, 0.5), spec).tolist() == bits.tolist()


def test_encoding_uses_only_the_information_set() -> None:
    spec = make_spec(8, 4)
    words = polar_encode_bits(np.eye(4, dtype=np.uint8), spec)
    rows = generator_matrix(8)[spec.info_set]
    assert np.array_equal(words, rows)
    with pytest.raises(ShapeError):
        polar_encode_bits(np.zeros((1, 3), dtype=np.uint8), spec)


def test_random_puncture_is_seeded() -> None:
    first = random_puncture(16, 12, seed=3)
    assert first == random_puncture(16, 12, seed=3)
    assert len(first) == 4 and len(set(first)) == 4
    assert all(0 <= i < 16 for i in first)
    with pytest.raises(ConfigurationError):
        random_puncture(8, 9, seed=0)


def test_depuncture_inserts_zeros() -> None:
    spec = PolarSpec(mother_length=8, length=6, dimension=3, info_set=[5, 6, 7], punctured=[0, 4])
    full = depuncture(np.arange(1.0, 7.0).reshape(1, 6), spec)
    assert full.tolist() == [[0.0, 1.0, 2.0, 3.0, 0.0, 4.0, 5.0, 6.0]]


def test_punctured_construction_round_trips_noiseless_words() -> None:
    spec = polar_construct(12, 5, design_snr_db=2.0, trials=2000, seed=4)
    assert (spec.mother_length, spec.length, spec.dimension) == (16, 12, 5)
    assert len(spec.punctured) == 4
    assert spec.construction is not None and len(spec.construction.bit_channel_ber) == 16
    codec = PolarCodec(spec)
    bits = np.random.default_rng(5).integers(0, 2, size=(32, 5)).astype(np.uint8)
    symbols = codec.encode(bits)
    assert symbols.shape == (32, 12)
    assert np.array_equal(codec.decode(symbols, np.full((32, 1), 0.3)), bits)


def test_construction_is_reproducible_and_picks_reliable_channels() -> None:
    first = polar_construct(8, 4, design_snr_db=1.0, trials=3000, seed=7)
    second = polar_construct(8, 4, design_snr_db=1.0, trials=3000, seed=7)
    assert first == second
    ber = np.array(first.construction.bit_channel_ber)
    frozen = [i for i in range(8) if i not in first.info_set]
    assert ber[first.info_set].max() <= ber[frozen].min()
    assert 7 in first.info_set and 0 not in first.info_set


def test_punctured_positions_hurt_their_bit_channels() -> None:
    ber = estimate_bit_channel_ber(8, [0, 1, 2, 3], design_snr_db=10.0, trials=2000, seed=0)
    # with the first half erased, index 0 only sees erasures
    assert ber[0] == pytest.approx(0.5, abs=0.05)
    assert ber[7] < 0.01


def test_construction_rejects_bad_dimensions() -> None:
    with pytest.raises(ConfigurationError):
        polar_construct(8, 9, design_snr_db=0.0, trials=10, seed=0)


def test_degenerate_construction_falls_back_to_index_order(caplog: pytest.LogCaptureFixture) -> None:
    spec = polar_construct(4, 2, design_snr_db=60.0, trials=20, seed=0)
    assert spec.construction.degenerate
    assert spec.info_set == [0, 1]
    assert "fall" in caplog.text


@pytest.mark.parametrize(("big_n", "k"), [(8, 4), (16, 8)])
@pytest.mark.parametrize("snr_db", [0.0, 2.0])
def test_sc_is_never_better_than_ml_on_shared_noise(big_n: int, k: int, snr_db: float) -> None:
    sc = PolarCodec(make_spec(big_n, k))
    ml = MlCodec("polar-ml", k, sc.encode)
    rng = np.random.default_rng(int(10 * snr_db) + big_n)
    bits = random_bits(rng, 100_000, k)
    symbols = sc.encode(bits)
    realization = sample_realization(ChannelKind.AWGN, PointSnr(db=snr_db), symbols.shape, rng)
    received = realization.apply(symbols)
    sc_stats = count_errors(sc.decode(received, realization.noise_std), bits)
    ml_stats = count_errors(ml.decode(received, realization.noise_std), bits)
    assert ml_stats.ber > 0
    assert sc_stats.ber >= ml_stats.ber - 3 * ml_stats.ber_std_error
