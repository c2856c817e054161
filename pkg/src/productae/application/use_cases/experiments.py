"""Cross-channel robustness and adaptivity experiments."""
from __future__ import annotations

import logging
from typing import Optional, Union

from productae.domain.entities import ChannelKind, ExperimentKind, ExperimentPlan, PointSnr, RangeSnr, TrainConfig
from productae.domain.errors import ConfigurationError
from productae.domain.ledger import TrainingLedger
from productae.domain.reports import AdaptivityReport, RobustnessReport
from productae.domain.services import ResultRepository
from productae.domain.stats import SweepResult
from productae.infrastructure.services.neural_codec import NeuralCodec, ProductAeModel
from productae.infrastructure.services.random_streams import stream

from .evaluate import monte_carlo_sweep
from .train import ProductAeTrainer

logger = logging.getLogger(__name__)


def shifted_config(base: TrainConfig, plan: ExperimentPlan) -> TrainConfig:
    """Training SNRs moved up by the plan's shift, decoder range re-centred around the new point."""
    gamma = base.encoder_snr.center + plan.snr_shift
    lo, hi = plan.decoder_offsets
    return base.model_copy(
        update={
            "encoder_snr": PointSnr(db=gamma),
            "decoder_snr": RangeSnr(lo=gamma + lo, hi=gamma + hi),
            "epochs": plan.fine_tune_epochs,
        }
    )


def _fine_tune(
    model: ProductAeModel,
    plan: ExperimentPlan,
    config: TrainConfig,
    channel: ChannelKind,
    name: str,
) -> TrainingLedger:
    """Plain epochs at the configured batch size, or large-batch epochs when the plan asks for them."""
    trainer = ProductAeTrainer(model, config, channel, stream_name=name)
    if plan.large_batch is None:
        return trainer.train(plan.fine_tune_epochs)
    return trainer.fine_tune(plan.large_batch, plan.fine_tune_epochs, stream_name=name)


def _sweep(
    model: ProductAeModel,
    kind: ChannelKind,
    plan: ExperimentPlan,
    seed: int,
    shards: int,
    label: str,
) -> SweepResult:
    return monte_carlo_sweep(NeuralCodec(model, name=label), kind, plan.snrs, plan.stop, seed, shards)


def robustness_experiment(
    model: ProductAeModel,
    plan: ExperimentPlan,
    base_config: TrainConfig,
    seed: int,
    shards: int = 1,
) -> RobustnessReport:
    """Evaluate an unmodified model on its training channel and on the test channel.

    With `fine_tune_epochs` > 0, a copy is first fine-tuned on the training
    channel at higher, wider SNRs and evaluated the same way.
    """
    on_train = _sweep(model, plan.train_channel, plan, seed, shards, "base")
    if plan.test_channel is plan.train_channel:
        on_test = on_train
    else:
        on_test = _sweep(model, plan.test_channel, plan, seed, shards, "base")
    report = RobustnessReport(
        train_channel=plan.train_channel,
        test_channel=plan.test_channel,
        on_train_channel=on_train,
        on_test_channel=on_test,
    )
    if plan.fine_tune_epochs == 0:
        return report
    tuned = model.clone()
    ledger = _fine_tune(tuned, plan, shifted_config(base_config, plan), plan.train_channel, "robustness")
    logger.info("robustness fine-tune finished after %d epochs", plan.fine_tune_epochs)
    report.tuned_on_train_channel = _sweep(tuned, plan.train_channel, plan, seed, shards, "tuned")
    report.tuned_on_test_channel = _sweep(tuned, plan.test_channel, plan, seed, shards, "tuned")
    report.fine_tune_history = ledger.records
    return report


def adaptivity_experiment(
    model: ProductAeModel,
    plan: ExperimentPlan,
    base_config: TrainConfig,
    seed: int,
    shards: int = 1,
) -> AdaptivityReport:
    """Train on `plan.test_channel` for a few epochs and compare both channels before and after.

    With `retrain_from_scratch`, the adapted model starts from fresh weights
    instead of the given ones, giving the full-retraining reference.
    """
    if plan.fine_tune_epochs < 1:
        raise ConfigurationError("adaptivity needs at least one epoch on the new channel")
    old, new = plan.train_channel, plan.test_channel
    before_on_new = _sweep(model, new, plan, seed, shards, "before")
    before_on_old = before_on_new if new is old else _sweep(model, old, plan, seed, shards, "before")
    if plan.retrain_from_scratch:
        adapted = ProductAeModel.initialize(model.spec, stream(seed, "adaptivity", "init"))
    else:
        adapted = model.clone()
    ledger = _fine_tune(adapted, plan, shifted_config(base_config, plan), new, "adaptivity")
    after_on_new = _sweep(adapted, new, plan, seed, shards, "after")
    after_on_old = after_on_new if new is old else _sweep(adapted, old, plan, seed, shards, "after")
    logger.info(
        "adaptivity %s -> %s: ber@%.2fdB %.3e -> %.3e",
        old.value,
        new.value,
        plan.snrs[-1],
        before_on_new.points[-1].stats.ber,
        after_on_new.points[-1].stats.ber,
    )
    return AdaptivityReport(
        old_channel=old,
        new_channel=new,
        retrained_from_scratch=plan.retrain_from_scratch,
        before_on_new=before_on_new,
        before_on_old=before_on_old,
        after_on_new=after_on_new,
        after_on_old=after_on_old,
        history=ledger.records,
    )


class ExperimentUseCase:
    """Dispatches an experiment plan and records its sweeps in the registry, if one is attached."""

    def __init__(self, repository: Optional[ResultRepository] = None) -> None:
        self._repository = repository

    def execute(
        self,
        model: ProductAeModel,
        plan: ExperimentPlan,
        base_config: TrainConfig,
        seed: int,
        shards: int = 1,
        config_json: str = "{}",
    ) -> Union[RobustnessReport, AdaptivityReport]:
        if plan.kind is ExperimentKind.ADAPTIVITY:
            report: Union[RobustnessReport, AdaptivityReport]
            report = adaptivity_experiment(model, plan, base_config, seed, shards)
        elif plan.kind is ExperimentKind.ROBUSTNESS:
            report = robustness_experiment(model, plan, base_config, seed, shards)
        else:
            raise ConfigurationError("plain sweeps are run through the eval command")
        if self._repository is not None:
            run_id = self._repository.start_run(plan.kind.value, config_json, seed)
            for label, result in report.sweeps().items():
                self._repository.save_sweep(run_id, label, result)
            history = report.history if isinstance(report, AdaptivityReport) else report.fine_tune_history
            self._repository.save_epochs(run_id, history)
        return report
