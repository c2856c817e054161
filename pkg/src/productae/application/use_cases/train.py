"""Alternating encoder/decoder training, schedule variants and large-batch fine-tuning."""
from __future__ import annotations

import hashlib
import json
import logging
import math
import time
from dataclasses import dataclass
from typing import Callable, Dict, Iterator, Optional, Sequence

import numpy as np

from productae.domain.entities import (
    BatchPolicy,
    ChannelKind,
    FineTunePlan,
    PointSnr,
    ScheduleScheme,
    TrainConfig,
)
from productae.domain.errors import ConfigurationError, NonFiniteGradientError, TrainingDivergedError
from productae.domain.ledger import Checkpoint, EpochRecord, TrainingLedger
from productae.domain.ledger import select_checkpoint as select_from_history
from productae.domain.services import ResultRepository
from productae.domain.stats import ErrorStats
from productae.infrastructure.nn.losses import bce_with_logits, l2_penalty
from productae.infrastructure.nn.optim import AdamOptimizer, AdamState, GradientAccumulator, accumulate_and_step
from productae.infrastructure.nn.tensor import Parameter, Tensor, freeze, no_grad
from productae.infrastructure.services.channel import ChannelRealization, sample_realization
from productae.infrastructure.services.neural_codec import ProductAeModel, hard_decision
from productae.infrastructure.services.random_streams import random_bits, stream

from .evaluate import count_errors

logger = logging.getLogger(__name__)

EpochCallback = Callable[[EpochRecord, Checkpoint], None]

DECODER = "decoder"
ENCODER = "encoder"


@dataclass(frozen=True)
class Schedule:
    """A run of consecutive decoder iterations over one pair (or all pairs when `pair` is None)."""

    label: str
    pair: Optional[int]
    iterations: int


def decoder_schedules(config: TrainConfig, iterations: int) -> list[Schedule]:
    """Decoder schedules of one epoch, in execution order; the encoder schedule always follows."""
    scheme = config.scheme
    if scheme is ScheduleScheme.JOINT:
        return [Schedule("decoder", None, config.dec_iterations)]
    if not config.pair_iterations:
        raise ConfigurationError(f"{scheme.value} needs pair_iterations")
    per_pair = list(config.pair_iterations)
    if len(per_pair) == 1:
        per_pair = per_pair * iterations
    if len(per_pair) != iterations:
        raise ConfigurationError(f"pair_iterations lists {len(per_pair)} counts for {iterations} decoder pairs")
    pairs = [Schedule(f"pair{i}", i, count) for i, count in enumerate(per_pair, start=1)]
    if scheme is ScheduleScheme.SCHEME_I:
        return pairs
    if config.dec_start_iterations is None:
        raise ConfigurationError(f"{scheme.value} needs dec_start_iterations")
    start = [Schedule("start", None, config.dec_start_iterations)]
    if scheme is ScheduleScheme.SCHEME_II:
        return start + pairs
    if config.dec_end_iterations is None:
        raise ConfigurationError(f"{scheme.value} needs dec_end_iterations")
    return start + pairs + [Schedule("end", None, config.dec_end_iterations)]


def frozen_parameters(model: ProductAeModel, trained: Sequence[Parameter]) -> list[Parameter]:
    ids = {id(p) for p in trained}
    return [p for p in model.parameters() if id(p) not in ids]


def config_fingerprint(model: ProductAeModel, config: TrainConfig, channel: ChannelKind) -> str:
    payload = json.dumps(
        {"spec": model.spec.model_dump(mode="json"), "train": config.model_dump(mode="json"), "channel": channel.value},
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def validate(
    model: ProductAeModel,
    snrs: Sequence[float],
    words: int,
    channel: ChannelKind,
    seed: int,
    chunk_size: int = 5000,
) -> Dict[float, ErrorStats]:
    """BER/BLER per SNR on validation data that depends only on (seed, SNR)."""
    if words < 1:
        raise ConfigurationError("validation needs at least one word")
    results: Dict[float, ErrorStats] = {}
    k, n = model.spec.k, model.spec.n
    with no_grad():
        for snr in snrs:
            rng = stream(seed, "validation", float(snr))
            stats = ErrorStats(k=k)
            for start in range(0, words, chunk_size):
                rows = min(chunk_size, words - start)
                bits = random_bits(rng, rows, k)
                realization = sample_realization(channel, PointSnr(db=snr), (rows, n), rng)
                logits = model.decode(realization.apply(model.encode(bits)))
                stats = stats.merge(count_errors(hard_decision(logits), bits))
            results[float(snr)] = stats
    return results


def training_loss(model: ProductAeModel, bits: np.ndarray, realization: ChannelRealization) -> float:
    """Loss of `model` on fixed messages and channel draws, without recording a graph."""
    with no_grad():
        return bce_with_logits(model.decode(realization.apply(model.encode(bits))), bits).item()


class ProductAeTrainer:
    """Owns a model's optimizers and random streams for the duration of a run."""

    def __init__(
        self,
        model: ProductAeModel,
        config: TrainConfig,
        channel: ChannelKind = ChannelKind.AWGN,
        *,
        stream_name: str = "train",
        on_epoch: Optional[EpochCallback] = None,
    ) -> None:
        self.model = model
        self.config = config
        self.channel = channel
        self.schedules = decoder_schedules(config, model.spec.iterations)
        self.encoder_optimizer = AdamOptimizer(model.encoder_parameters(), config.lr_enc)
        self.decoder_optimizer = AdamOptimizer(model.decoder_parameters(), config.lr_dec)
        self.ledger = TrainingLedger()
        self._on_epoch = on_epoch
        self._fingerprint = config_fingerprint(model, config, channel)
        self._epoch_batch: Optional[np.ndarray] = None
        self.use_streams(stream_name)

    def use_streams(self, name: str) -> None:
        """Switch message and noise draws to the sub-streams called `name`."""
        self._messages = stream(self.config.seed, name, "messages")
        self._noise = stream(self.config.seed, name, "noise")

    # -- optimizer state ----------------------------------------------------

    def optimizer_snapshot(self) -> Dict[str, AdamState]:
        return {ENCODER: self.encoder_optimizer.state, DECODER: self.decoder_optimizer.state}

    def restore_optimizers(self, snapshot: Dict[str, AdamState]) -> None:
        for side, optimizer in ((ENCODER, self.encoder_optimizer), (DECODER, self.decoder_optimizer)):
            state = snapshot[side]
            optimizer.load_moments(state.first_moment, state.second_moment, state.step_count)

    def reset_optimizers(self) -> None:
        self.encoder_optimizer.reset()
        self.decoder_optimizer.reset()

    # -- single updates -----------------------------------------------------

    def _message_batch(self, rows: int) -> np.ndarray:
        if self.config.batch_policy is BatchPolicy.FRESH_PER_EPOCH:
            if self._epoch_batch is None or self._epoch_batch.shape[0] != rows:
                self._epoch_batch = random_bits(self._messages, rows, self.model.spec.k)
            return self._epoch_batch
        return random_bits(self._messages, rows, self.model.spec.k)

    def iteration(
        self,
        side: str,
        sub_batches: int = 1,
        sub_batch_size: Optional[int] = None,
        pair: Optional[int] = None,
    ) -> float:
        """One optimizer step for `side` over a (virtual) batch of sub_batches × sub_batch_size words.

        The whole batch's messages and channel draws are taken up front and
        sliced per sub-batch, so any split of the same batch yields the same update.
        """
        spec = self.model.spec
        size = sub_batch_size or self.config.batch_size
        rows = sub_batches * size
        bits = self._message_batch(rows)
        policy = self.config.decoder_policy if side == DECODER else self.config.encoder_snr
        realization = sample_realization(self.channel, policy, (rows, spec.n), self._noise)
        if side == DECODER:
            optimizer = self.decoder_optimizer
            trained = self.model.decoder_parameters(pair)
        else:
            optimizer = self.encoder_optimizer
            trained = self.model.encoder_parameters()
        accumulator = GradientAccumulator(optimizer.params, sub_batches, size)
        losses = self._sub_batch_losses(side, bits, realization, sub_batches, size)
        with freeze(frozen_parameters(self.model, trained)):
            return accumulate_and_step(accumulator, losses, optimizer)

    def _sub_batch_losses(
        self,
        side: str,
        bits: np.ndarray,
        realization: ChannelRealization,
        sub_batches: int,
        size: int,
    ) -> Iterator[tuple[Tensor, int]]:
        for index in range(sub_batches):
            rows = slice(index * size, (index + 1) * size)
            u = bits[rows]
            if side == DECODER:
                with no_grad():
                    codewords = self.model.encode(u)
            else:
                codewords = self.model.encode(u)
            logits = self.model.decode(realization.take(rows).apply(codewords))
            loss = bce_with_logits(logits, u)
            if side == ENCODER and self.config.l2 > 0:
                loss = loss + self.config.l2 * l2_penalty(self.model.encoder_parameters())
            if not math.isfinite(loss.item()):
                raise NonFiniteGradientError(f"loss became {loss.item()}")
            yield loss, size

    def _run_schedule(
        self,
        side: str,
        label: str,
        count: int,
        epoch: int,
        plan: FineTunePlan,
        pair: Optional[int] = None,
    ) -> list[float]:
        losses: list[float] = []
        for it in range(count):
            try:
                losses.append(self.iteration(side, plan.sub_batches, plan.sub_batch_size, pair))
            except NonFiniteGradientError as exc:
                raise TrainingDivergedError(
                    f"training diverged in schedule {label!r} at epoch {epoch}, iteration {it}: {exc}",
                    epoch=epoch,
                    iteration=it,
                    schedule=label,
                ) from exc
        if count:
            logger.debug("epoch %d schedule %s: %d iterations, last loss %.5f", epoch, label, count, losses[-1])
        return losses

    # -- epochs -------------------------------------------------------------

    def run_epoch(self, epoch: int, plan: Optional[FineTunePlan] = None) -> Optional[float]:
        """Decoder schedules, then the encoder schedule. Returns the mean loss (None if nothing ran)."""
        plan = plan or FineTunePlan(sub_batches=1, sub_batch_size=self.config.batch_size)
        self._epoch_batch = None
        losses: list[float] = []
        for schedule in self.schedules:
            losses += self._run_schedule(DECODER, schedule.label, schedule.iterations, epoch, plan, schedule.pair)
        losses += self._run_schedule(ENCODER, "encoder", self.config.enc_iterations, epoch, plan)
        return float(np.mean(losses)) if losses else None

    def _record(self, epoch: int, phase: str, loss: Optional[float], steps_before: tuple[int, int], started: float) -> EpochRecord:
        plan = self.config.validation
        metrics = validate(self.model, plan.snrs, plan.words, self.channel, self.config.seed, plan.chunk_size)
        record = EpochRecord(
            epoch=epoch,
            phase=phase,
            train_loss=loss,
            decoder_steps=self.decoder_optimizer.steps - steps_before[0],
            encoder_steps=self.encoder_optimizer.steps - steps_before[1],
            validation=metrics,
            wall_time_s=time.perf_counter() - started,
        )
        checkpoint = Checkpoint(
            epoch=epoch,
            weights=self.model.state_dict(),
            optimizer=self.optimizer_snapshot(),
            validation=metrics,
            fingerprint=self._fingerprint,
        )
        self.ledger.append(record, checkpoint)
        logger.info(
            "epoch %d (%s): loss=%s %s [%.1fs]",
            epoch,
            phase,
            "-" if loss is None else f"{loss:.5f}",
            " ".join(f"ber@{snr:g}dB={stats.ber:.3e}" for snr, stats in metrics.items()),
            record.wall_time_s,
        )
        if self._on_epoch is not None:
            self._on_epoch(record, checkpoint)
        return record

    def _steps(self) -> tuple[int, int]:
        return self.decoder_optimizer.steps, self.encoder_optimizer.steps

    def record_initial(self) -> EpochRecord:
        """Validate and checkpoint the model before any update (epoch 0)."""
        return self._record(0, "init", None, self._steps(), time.perf_counter())

    def train(self, epochs: Optional[int] = None) -> TrainingLedger:
        if len(self.ledger) == 0:
            self.record_initial()
        for _ in range(self.config.epochs if epochs is None else epochs):
            epoch = self.ledger.next_epoch
            started, before = time.perf_counter(), self._steps()
            loss = self.run_epoch(epoch)
            self._record(epoch, "train", loss, before, started)
        return self.ledger

    def fine_tune(
        self,
        plan: FineTunePlan,
        epochs: Optional[int] = None,
        stream_name: str = "fine_tune",
    ) -> TrainingLedger:
        """Epochs whose every iteration accumulates L sub-batches of B_s words before stepping."""
        if len(self.ledger) == 0:
            self.record_initial()
        if plan.reset_moments:
            self.reset_optimizers()
        self.use_streams(stream_name)
        for _ in range(plan.epochs if epochs is None else epochs):
            epoch = self.ledger.next_epoch
            started, before = time.perf_counter(), self._steps()
            loss = self.run_epoch(epoch, plan)
            self._record(epoch, "fine_tune", loss, before, started)
        return self.ledger


def train(
    model: ProductAeModel,
    config: TrainConfig,
    channel: ChannelKind = ChannelKind.AWGN,
    on_epoch: Optional[EpochCallback] = None,
) -> TrainingLedger:
    """Run `config.epochs` epochs, then the configured fine-tuning epochs, if any."""
    trainer = ProductAeTrainer(model, config, channel, on_epoch=on_epoch)
    trainer.train()
    if config.fine_tune.epochs:
        trainer.fine_tune(config.fine_tune)
    return trainer.ledger


def multi_schedule_epoch(
    model: ProductAeModel,
    config: TrainConfig,
    channel: ChannelKind = ChannelKind.AWGN,
    trainer: Optional[ProductAeTrainer] = None,
) -> ProductAeModel:
    """One epoch of a per-pair decoder scheme followed by the encoder schedule."""
    if config.scheme is ScheduleScheme.JOINT:
        raise ConfigurationError("multi-schedule epochs need scheme_i, scheme_ii or scheme_iii")
    trainer = trainer or ProductAeTrainer(model, config, channel)
    trainer.run_epoch(max(1, trainer.ledger.next_epoch))
    return model


def fine_tune_large_batch(
    model: ProductAeModel,
    config: TrainConfig,
    sub_batches: int,
    sub_batch_size: int,
    channel: ChannelKind = ChannelKind.AWGN,
    epochs: Optional[int] = None,
    trainer: Optional[ProductAeTrainer] = None,
) -> TrainingLedger:
    plan = config.fine_tune.model_copy(update={"sub_batches": sub_batches, "sub_batch_size": sub_batch_size})
    trainer = trainer or ProductAeTrainer(model, config, channel)
    return trainer.fine_tune(plan, epochs if epochs is not None else max(1, plan.epochs))


def select_checkpoint(history: TrainingLedger, criterion_snr: float) -> Checkpoint:
    return select_from_history(history, criterion_snr)


class TrainUseCase:
    """Trains a model and optionally mirrors its history into the results registry."""

    def __init__(self, repository: Optional[ResultRepository] = None) -> None:
        self._repository = repository

    def execute(
        self,
        model: ProductAeModel,
        config: TrainConfig,
        channel: ChannelKind = ChannelKind.AWGN,
        on_epoch: Optional[EpochCallback] = None,
        config_json: str = "{}",
    ) -> TrainingLedger:
        ledger = train(model, config, channel, on_epoch)
        if self._repository is not None:
            run_id = self._repository.start_run("train", config_json, config.seed)
            self._repository.save_epochs(run_id, ledger.records)
        return ledger


class FineTuneUseCase:
    """Large-batch fine-tuning of a loaded model, resuming its optimizer moments when available."""

    def __init__(self, repository: Optional[ResultRepository] = None) -> None:
        self._repository = repository

    def execute(
        self,
        model: ProductAeModel,
        config: TrainConfig,
        plan: FineTunePlan,
        channel: ChannelKind = ChannelKind.AWGN,
        optimizer_state: Optional[Dict[str, AdamState]] = None,
        on_epoch: Optional[EpochCallback] = None,
        config_json: str = "{}",
    ) -> TrainingLedger:
        trainer = ProductAeTrainer(model, config, channel, on_epoch=on_epoch)
        if optimizer_state is not None:
            trainer.restore_optimizers(optimizer_state)
        else:
            logger.info("checkpoint carries no optimizer state; fine-tuning starts from fresh moments")
        ledger = trainer.fine_tune(plan)
        if self._repository is not None:
            run_id = self._repository.start_run("finetune", config_json, config.seed)
            self._repository.save_epochs(run_id, ledger.records)
        return ledger
