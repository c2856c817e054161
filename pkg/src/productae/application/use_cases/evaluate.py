"""Monte-Carlo BER/BLER estimation."""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Sequence

import numpy as np

from productae.domain.entities import ChannelKind, PointSnr, StopRule
from productae.domain.services import Codec, ResultRepository
from productae.domain.stats import ErrorStats, SweepPoint, SweepResult
from productae.infrastructure.services.channel import sample_realization
from productae.infrastructure.services.random_streams import random_bits, stream

logger = logging.getLogger(__name__)


def count_errors(decided: np.ndarray, bits: np.ndarray) -> ErrorStats:
    wrong = np.asarray(decided) != np.asarray(bits)
    return ErrorStats(
        trials=bits.shape[0],
        bit_errors=int(wrong.sum()),
        block_errors=int(wrong.any(axis=1).sum()),
        k=bits.shape[1],
    )


def simulate_blocks(
    codec: Codec,
    kind: ChannelKind,
    snr_db: float,
    blocks: int,
    rng: np.random.Generator,
) -> ErrorStats:
    """Push `blocks` random messages through encode → channel → decode."""
    if blocks == 0:
        return ErrorStats(k=codec.k)
    bits = random_bits(rng, blocks, codec.k)
    symbols = codec.encode(bits)
    realization = sample_realization(kind, PointSnr(db=snr_db), symbols.shape, rng)
    return count_errors(codec.decode(realization.apply(symbols), realization.noise_std), bits)


def split_evenly(total: int, parts: int) -> list[int]:
    base, extra = divmod(total, parts)
    return [base + (1 if index < extra else 0) for index in range(parts)]


def simulate_point(
    codec: Codec,
    kind: ChannelKind,
    snr_db: float,
    stop: StopRule,
    seed: int,
    shards: int = 1,
    pool: Optional[ThreadPoolExecutor] = None,
) -> SweepPoint:
    """Simulate rounds until `stop.min_block_errors` block errors or `stop.max_blocks` blocks."""
    streams = [stream(seed, "sweep", float(snr_db), shard) for shard in range(shards)]
    stats = ErrorStats(k=codec.k)
    while stats.block_errors < stop.min_block_errors and stats.trials < stop.max_blocks:
        sizes = split_evenly(min(stop.blocks_per_round, stop.max_blocks - stats.trials), shards)
        jobs = [(size, rng) for size, rng in zip(sizes, streams)]
        if pool is None:
            parts = [simulate_blocks(codec, kind, snr_db, size, rng) for size, rng in jobs]
        else:
            parts = list(pool.map(lambda job: simulate_blocks(codec, kind, snr_db, *job), jobs))
        stats = stats.merge(ErrorStats.total(parts, codec.k))
    capped = stats.block_errors < stop.min_block_errors
    logger.info(
        "%s @ %.2f dB: ber=%.3e bler=%.3e over %d blocks%s",
        codec.name,
        snr_db,
        stats.ber,
        stats.bler,
        stats.trials,
        " (capped)" if capped else "",
    )
    return SweepPoint(snr_db=float(snr_db), stats=stats, capped=capped)


def monte_carlo_sweep(
    codec: Codec,
    kind: ChannelKind,
    snrs: Sequence[float],
    stop: StopRule,
    seed: int,
    shards: int = 1,
) -> SweepResult:
    """Error rates of `codec` over an increasing SNR grid.

    Every (SNR, shard) pair owns its random stream, so results depend only on
    the seed and the shard count.
    """
    if not snrs:
        raise ValueError("SNR grid is empty")
    if shards < 1:
        raise ValueError("shard count must be positive")
    if shards == 1:
        points = [simulate_point(codec, kind, snr, stop, seed) for snr in snrs]
    else:
        with ThreadPoolExecutor(max_workers=shards) as pool:
            points = [simulate_point(codec, kind, snr, stop, seed, shards, pool) for snr in snrs]
    return SweepResult(codec=codec.name, channel=kind, seed=seed, shards=shards, points=points)


class SweepUseCase:
    """Runs a sweep and, when a registry is configured, records it."""

    def __init__(self, repository: Optional[ResultRepository] = None) -> None:
        self._repository = repository

    def execute(
        self,
        codec: Codec,
        kind: ChannelKind,
        snrs: Sequence[float],
        stop: StopRule,
        seed: int,
        shards: int = 1,
        config_json: str = "{}",
    ) -> SweepResult:
        result = monte_carlo_sweep(codec, kind, snrs, stop, seed, shards)
        if self._repository is not None:
            run_id = self._repository.start_run("sweep", config_json, seed)
            self._repository.save_sweep(run_id, codec.name, result)
        return result
