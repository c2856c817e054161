from __future__ import annotations

import math

import numpy as np
import pytest

from productae.application.use_cases.evaluate import (
    SweepUseCase,
    count_errors,
    monte_carlo_sweep,
    simulate_point,
    split_evenly,
)
from productae.domain.entities import ChannelKind, PolarSpec, StopRule
from productae.infrastructure.database.sqlite_repository import SQLAlchemyResultRepository
from productae.infrastructure.services.polar import PolarCodec, bhattacharyya_order
from productae.infrastructure.services.uncoded import UncodedCodec, uncoded_bpsk_ber

EXHAUST = StopRule(min_block_errors=10**6, max_blocks=2000, blocks_per_round=500)


def test_count_errors() -> None:
    bits = np.array([[0, 1, 1], [1, 1, 0], [0, 0, 0]], dtype=np.uint8)
    decided = np.array([[0, 1, 1], [0, 0, 0], [0, 0, 1]], dtype=np.uint8)
    stats = count_errors(decided, bits)
    assert (stats.trials, stats.bit_errors, stats.block_errors, stats.k) == (3, 3, 2, 3)


def test_split_evenly() -> None:
    assert split_evenly(10, 3) == [4, 3, 3]
    assert split_evenly(2, 4) == [1, 1, 0, 0]


def test_uncoded_awgn_matches_closed_form() -> None:
    result = monte_carlo_sweep(UncodedCodec(100), ChannelKind.AWGN, [0.0], EXHAUST, seed=1)
    point = result.points[0]
    assert point.stats.trials == 2000 and point.capped
    assert abs(point.stats.ber - 0.158655) < 3 * point.stats.ber_std_error


def test_uncoded_rayleigh_matches_closed_form() -> None:
    result = monte_carlo_sweep(UncodedCodec(100), ChannelKind.RAYLEIGH, [0.0], EXHAUST, seed=2)
    point = result.points[0]
    # E[Q(a/σ)] over unit-power Rayleigh a with σ = 1
    expected = 0.5 * (1.0 - math.sqrt(0.5 / 1.5))
    assert abs(point.stats.ber - expected) < 3 * point.stats.ber_std_error


def test_simulation_stops_on_block_errors() -> None:
    stop = StopRule(min_block_errors=10, max_blocks=1000, blocks_per_round=100)
    point = simulate_point(UncodedCodec(8), ChannelKind.AWGN, -5.0, stop, seed=3)
    assert point.stats.trials == 100
    assert not point.capped


def test_noiseless_points_hit_the_cap() -> None:
    info_set = sorted(bhattacharyya_order(8, 0.0)[:4])
    codec = PolarCodec(PolarSpec(mother_length=8, length=8, dimension=4, info_set=info_set))
    stop = StopRule(min_block_errors=5, max_blocks=300, blocks_per_round=128)
    result = monte_carlo_sweep(codec, ChannelKind.AWGN, [40.0], stop, seed=4)
    assert result.points[0].stats.trials == 300
    assert result.points[0].stats.block_errors == 0
    assert result.points[0].capped


def test_sweeps_are_reproducible_per_shard_count() -> None:
    codec = UncodedCodec(16)
    first = monte_carlo_sweep(codec, ChannelKind.AWGN, [0.0, 2.0], EXHAUST, seed=5, shards=3)
    again = monte_carlo_sweep(codec, ChannelKind.AWGN, [0.0, 2.0], EXHAUST, seed=5, shards=3)
    single = monte_carlo_sweep(codec, ChannelKind.AWGN, [0.0, 2.0], EXHAUST, seed=5, shards=1)
    assert first == again
    assert first.shards == 3 and single.shards == 1
    assert [p.stats.trials for p in first.points] == [p.stats.trials for p in single.points]


def test_adding_a_point_does_not_disturb_the_others() -> None:
    codec = UncodedCodec(16)
    short = monte_carlo_sweep(codec, ChannelKind.AWGN, [2.0], EXHAUST, seed=6)
    long = monte_carlo_sweep(codec, ChannelKind.AWGN, [0.0, 2.0, 4.0], EXHAUST, seed=6)
    assert long.at(2.0) == short.points[0]


def test_uncoded_sweep_is_monotone() -> None:
    result = monte_carlo_sweep(UncodedCodec(64), ChannelKind.AWGN, [0.0, 2.0, 4.0], EXHAUST, seed=7)
    bers = [p.stats.ber for p in result.points]
    assert bers[0] > bers[1] > bers[2]
    assert bers[2] == pytest.approx(uncoded_bpsk_ber(4.0), rel=0.2)


def test_bad_arguments() -> None:
    with pytest.raises(ValueError):
        monte_carlo_sweep(UncodedCodec(4), ChannelKind.AWGN, [], EXHAUST, seed=0)
    with pytest.raises(ValueError):
        monte_carlo_sweep(UncodedCodec(4), ChannelKind.AWGN, [0.0], EXHAUST, seed=0, shards=0)
    with pytest.raises(ValueError):
        monte_carlo_sweep(UncodedCodec(4), ChannelKind.AWGN, [1.0, 0.0], EXHAUST, seed=0)


def test_sweep_use_case_records_results(repository: SQLAlchemyResultRepository) -> None:
    result = SweepUseCase(repository).execute(UncodedCodec(4), ChannelKind.AWGN, [1.0], EXHAUST, seed=8)
    run = repository.list_runs()[0]
    assert run["kind"] == "sweep"
    assert repository.load_sweep(run["id"], "uncoded(4)") == result
