"""Typer CLI entry point for the ProductAE laboratory."""
from __future__ import annotations

import json
import logging
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, List, Optional

import numpy as np
import typer
from pydantic import ValidationError
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from productae.application.use_cases.construct_polar import ConstructPolarUseCase, load_polar_spec
from productae.application.use_cases.evaluate import SweepUseCase
from productae.application.use_cases.experiments import ExperimentUseCase
from productae.application.use_cases.train import FineTuneUseCase, TrainUseCase
from productae.config.settings import get_settings
from productae.domain.entities import (
    ChannelKind,
    ExperimentKind,
    ExperimentPlan,
    FineTunePlan,
    ProductCodeSpec,
    StopRule,
)
from productae.domain.errors import ConfigurationError, ProductAeError
from productae.domain.ledger import Checkpoint, EpochRecord, TrainingLedger
from productae.domain.reports import AdaptivityReport, RobustnessReport
from productae.domain.services import Codec
from productae.domain.stats import SweepResult
from productae.infrastructure.database.sqlite_repository import SQLAlchemyResultRepository
from productae.infrastructure.persistence.checkpoint_file import CheckpointMeta, load_checkpoint, save_checkpoint
from productae.infrastructure.persistence.results_csv import (
    append_history_jsonl,
    merge_sweep_csvs,
    write_history_jsonl,
    write_sweep_csv,
)
from productae.infrastructure.persistence.run_config import (
    OutputPaths,
    RunConfig,
    dump_run_config,
    load_run_config,
    save_run_config,
)
from productae.infrastructure.services.linear_codes import ProductCodec, component_from_token
from productae.infrastructure.services.neural_codec import NeuralCodec, ProductAeModel
from productae.infrastructure.services.polar import PolarCodec, polar_construct
from productae.infrastructure.services.random_streams import stream
from productae.infrastructure.services.uncoded import UncodedCodec

settings = get_settings()
logger = logging.getLogger(__name__)
console = Console()

app = typer.Typer(help="ProductAE laboratory: train neural product codes and compare them with classical baselines")

GRID_TOLERANCE = 1e-9


def parse_snr_grid(text: str) -> list[float]:
    """`lo:hi:step` (both ends included when step divides the span), a comma list, or one value."""
    try:
        if ":" in text:
            lo, hi, step = (float(part) for part in text.split(":"))
            if step <= 0:
                raise typer.BadParameter(f"grid step must be positive, got {step}")
            if hi < lo:
                raise typer.BadParameter(f"grid end {hi} lies below its start {lo}")
            count = int(np.floor((hi - lo) / step + GRID_TOLERANCE)) + 1
            return [round(lo + index * step, 12) for index in range(count)]
        values = [float(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise typer.BadParameter(f"cannot read SNR grid {text!r}: {exc}") from exc
    if not values or any(b <= a for a, b in zip(values, values[1:])):
        raise typer.BadParameter(f"SNR grid {text!r} must list increasing values")
    return values


@app.callback()
def main(
    log_level: str = typer.Option(settings.log_level, "--log-level", help="Logging level (DEBUG, INFO, WARNING, ...)"),
) -> None:
    logging.basicConfig(
        level=log_level.upper(),
        format="%(message)s",
        handlers=[RichHandler(console=Console(stderr=True), show_path=False)],
        force=True,
    )


@contextmanager
def _diagnostics() -> Iterator[None]:
    """Report library failures on stderr and exit with status 1."""
    try:
        yield
    except (ProductAeError, ValidationError, OSError, KeyError) as exc:
        logger.debug("command failed", exc_info=True)
        typer.secho(f"error: {exc}", fg=typer.colors.RED, err=True)
        raise typer.Exit(code=1) from exc


def _build_repository(enabled: bool) -> Optional[SQLAlchemyResultRepository]:
    if not (enabled and settings.registry_enabled):
        return None
    return SQLAlchemyResultRepository(settings.registry_path.resolve())


@contextmanager
def _registry(enabled: bool) -> Iterator[Optional[SQLAlchemyResultRepository]]:
    repository = _build_repository(enabled)
    try:
        yield repository
    finally:
        if repository is not None:
            repository.dispose()


def _stop_rule(min_block_errors: Optional[int], max_blocks: Optional[int], blocks_per_round: Optional[int]) -> StopRule:
    return StopRule(
        min_block_errors=min_block_errors or settings.min_block_errors,
        max_blocks=max_blocks or settings.max_blocks,
        blocks_per_round=blocks_per_round or settings.blocks_per_round,
    )


def _print_sweep(result: SweepResult, title: Optional[str] = None) -> None:
    table = Table(title=title or f"{result.codec} over {result.channel.value}")
    for column in ("SNR (dB)", "BER", "BLER", "blocks", "block errors", "capped"):
        table.add_column(column, justify="right")
    for point in result.points:
        table.add_row(
            f"{point.snr_db:g}",
            f"{point.stats.ber:.3e}",
            f"{point.stats.bler:.3e}",
            str(point.stats.trials),
            str(point.stats.block_errors),
            "yes" if point.capped else "",
        )
    console.print(table)


class RunRecorder:
    """Writes one checkpoint and one history line per epoch, and the selected best model at the end."""

    def __init__(self, model: ProductAeModel, output: OutputPaths, seed: int) -> None:
        self.model = model
        self.output = output
        self.seed = seed
        self.history_path = output.directory / output.history
        output.directory.mkdir(parents=True, exist_ok=True)
        self.history_path.write_text("", encoding="utf-8")

    def __call__(self, record: EpochRecord, checkpoint: Checkpoint) -> None:
        save_checkpoint(self.model, self._meta(checkpoint), self.output.checkpoint(record.epoch), checkpoint.optimizer)
        append_history_jsonl(record, self.history_path)

    def _meta(self, checkpoint: Checkpoint) -> CheckpointMeta:
        return CheckpointMeta(
            epoch=checkpoint.epoch,
            seed=self.seed,
            validation=checkpoint.validation,
            fingerprint=checkpoint.fingerprint,
        )

    def save_best(self, ledger: TrainingLedger, criterion_snr: float) -> Checkpoint:
        best = ledger.select_checkpoint(criterion_snr)
        chosen = self.model.clone()
        chosen.load_state_dict(best.weights)
        save_checkpoint(chosen, self._meta(best), self.output.directory / self.output.best_checkpoint, best.optimizer)
        return best


def _with_output(config: RunConfig, out: Optional[Path], seed: Optional[int]) -> RunConfig:
    update = {}
    if out is not None:
        update["output"] = config.output.model_copy(update={"directory": out})
    if seed is not None:
        update["training"] = config.training.model_copy(update={"seed": seed})
    return config.model_copy(update=update) if update else config


@app.command()
def train(
    config_path: Path = typer.Option(..., "--config", exists=True, readable=True, help="JSON run config"),
    out: Optional[Path] = typer.Option(None, "--out", help="Output directory (overrides the config)"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Root seed (overrides training.seed)"),
    registry: bool = typer.Option(True, "--registry/--no-registry", help="Record the run in the SQLite registry"),
) -> None:
    """Train a ProductAE with alternating decoder/encoder schedules."""

    with _diagnostics(), _registry(registry) as repository:
        config = _with_output(load_run_config(config_path), out, seed)
        model = ProductAeModel.initialize(config.code, stream(config.training.seed, "init"))
        save_run_config(config, config.output.directory / "config.json")
        recorder = RunRecorder(model, config.output, config.training.seed)
        ledger = TrainUseCase(repository).execute(
            model, config.training, config.channel.kind, recorder, dump_run_config(config)
        )
        criterion = config.training.validation.criterion
        best = recorder.save_best(ledger, criterion)
        typer.secho(
            f"Trained {len(ledger) - 1} epochs; best epoch {best.epoch} at {criterion:g} dB "
            f"-> {config.output.directory / config.output.best_checkpoint}",
            fg=typer.colors.GREEN,
        )


@app.command()
def finetune(
    checkpoint: Path = typer.Option(..., "--checkpoint", exists=True, readable=True, help="Checkpoint to start from"),
    config_path: Path = typer.Option(..., "--config", exists=True, readable=True, help="JSON run config"),
    out: Optional[Path] = typer.Option(None, "--out", help="Output directory (overrides the config)"),
    sub_batches: Optional[int] = typer.Option(None, "--sub-batches", min=1, help="Sub-batches accumulated per step (L)"),
    sub_batch_size: Optional[int] = typer.Option(None, "--sub-batch-size", min=1, help="Words per sub-batch (B_s)"),
    epochs: Optional[int] = typer.Option(None, "--epochs", min=1, help="Fine-tuning epochs"),
    reset_moments: Optional[bool] = typer.Option(None, "--reset-moments/--keep-moments", help="Clear Adam moments first"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Root seed (overrides training.seed)"),
    registry: bool = typer.Option(True, "--registry/--no-registry", help="Record the run in the SQLite registry"),
) -> None:
    """Large-batch fine-tuning of a checkpoint with gradient accumulation."""

    with _diagnostics(), _registry(registry) as repository:
        config = _with_output(load_run_config(config_path), out, seed)
        loaded = load_checkpoint(checkpoint)
        if loaded.model.spec != config.code:
            raise ConfigurationError(f"checkpoint {checkpoint} was trained for a different code than the config describes")
        overrides = {
            key: value
            for key, value in (
                ("sub_batches", sub_batches),
                ("sub_batch_size", sub_batch_size),
                ("epochs", epochs),
                ("reset_moments", reset_moments),
            )
            if value is not None
        }
        plan = FineTunePlan.model_validate({**config.training.fine_tune.model_dump(), **overrides})
        if plan.epochs < 1:
            raise ConfigurationError("fine-tuning needs at least one epoch (set --epochs or training.fine_tune.epochs)")
        recorder = RunRecorder(loaded.model, config.output, config.training.seed)
        ledger = FineTuneUseCase(repository).execute(
            loaded.model,
            config.training,
            plan,
            config.channel.kind,
            loaded.optimizer,
            recorder,
            dump_run_config(config),
        )
        best = recorder.save_best(ledger, config.training.validation.criterion)
        typer.secho(
            f"Fine-tuned {plan.epochs} epochs with virtual batch {plan.virtual_batch}; best epoch {best.epoch}",
            fg=typer.colors.GREEN,
        )


def _run_sweep(
    codec: Codec,
    channel: ChannelKind,
    snrs: str,
    csv_path: Optional[Path],
    seed: Optional[int],
    shards: Optional[int],
    stop: StopRule,
    registry: bool,
) -> SweepResult:
    grid = parse_snr_grid(snrs)
    with _registry(registry) as repository:
        result = SweepUseCase(repository).execute(
            codec,
            channel,
            grid,
            stop,
            settings.default_seed if seed is None else seed,
            shards or settings.sweep_shards,
            config_json=json.dumps({"codec": codec.name, "channel": channel.value, "snrs": grid}),
        )
    _print_sweep(result)
    if csv_path is not None:
        write_sweep_csv(result, csv_path)
        typer.secho(f"Wrote {len(result.points)} points to {csv_path}", fg=typer.colors.GREEN)
    return result


@app.command("eval")
def evaluate(
    checkpoint: Path = typer.Option(..., "--checkpoint", exists=True, readable=True, help="Model checkpoint"),
    snrs: str = typer.Option(..., "--snrs", help="SNR grid lo:hi:step (dB)"),
    channel: ChannelKind = typer.Option(ChannelKind.AWGN, "--channel", help="awgn or rayleigh"),
    csv_path: Optional[Path] = typer.Option(None, "--csv", help="Write the sweep to this CSV"),
    label: str = typer.Option("productae", "--label", help="Codec label in the results"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Root seed of the sweep"),
    shards: Optional[int] = typer.Option(None, "--shards", min=1, help="Independent random streams per SNR, run in threads"),
    min_block_errors: Optional[int] = typer.Option(None, "--min-block-errors", min=1),
    max_blocks: Optional[int] = typer.Option(None, "--max-blocks", min=1),
    blocks_per_round: Optional[int] = typer.Option(None, "--blocks-per-round", min=1),
    registry: bool = typer.Option(True, "--registry/--no-registry", help="Record the sweep in the SQLite registry"),
) -> None:
    """Monte-Carlo BER/BLER sweep of a trained ProductAE."""

    with _diagnostics():
        codec = NeuralCodec(load_checkpoint(checkpoint).model, name=label)
        stop = _stop_rule(min_block_errors, max_blocks, blocks_per_round)
        _run_sweep(codec, channel, snrs, csv_path, seed, shards, stop, registry)


def _baseline_codec(
    code: str,
    k: Optional[int],
    n: Optional[int],
    components: List[str],
    polar_spec: Optional[Path],
    design_snr: float,
    trials: int,
    seed: int,
) -> Codec:
    if code == "uncoded":
        if k is None:
            raise ConfigurationError("uncoded baseline needs --k")
        return UncodedCodec(k)
    if code == "product":
        if not components:
            raise ConfigurationError("product baseline needs at least one --component (e.g. hamming:3)")
        return ProductCodec(ProductCodeSpec(components=[component_from_token(token) for token in components]))
    if code == "polar":
        if polar_spec is not None:
            return PolarCodec(load_polar_spec(polar_spec))
        if k is None or n is None:
            raise ConfigurationError("polar baseline needs --polar-spec or both --n and --k")
        return PolarCodec(polar_construct(n, k, design_snr, trials, seed))
    raise ConfigurationError(f"unknown baseline code {code!r}; choose polar, product or uncoded")


@app.command()
def baseline(
    code: str = typer.Option(..., "--code", help="polar, product or uncoded"),
    snrs: str = typer.Option(..., "--snrs", help="SNR grid lo:hi:step (dB)"),
    k: Optional[int] = typer.Option(None, "--k", min=1, help="Message length (uncoded, polar)"),
    n: Optional[int] = typer.Option(None, "--n", min=1, help="Block length (polar)"),
    component: List[str] = typer.Option([], "--component", help="Product component, e.g. hamming:3, spc:3, rep:3"),
    polar_spec: Optional[Path] = typer.Option(None, "--polar-spec", exists=True, readable=True, help="PolarSpec JSON"),
    design_snr: float = typer.Option(0.0, "--design-snr", help="Polar construction SNR (dB)"),
    trials: int = typer.Option(10_000, "--trials", min=1, help="Polar construction trials"),
    channel: ChannelKind = typer.Option(ChannelKind.AWGN, "--channel", help="awgn or rayleigh"),
    csv_path: Optional[Path] = typer.Option(None, "--csv", help="Write the sweep to this CSV"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Root seed"),
    shards: Optional[int] = typer.Option(None, "--shards", min=1, help="Independent random streams per SNR, run in threads"),
    min_block_errors: Optional[int] = typer.Option(None, "--min-block-errors", min=1),
    max_blocks: Optional[int] = typer.Option(None, "--max-blocks", min=1),
    blocks_per_round: Optional[int] = typer.Option(None, "--blocks-per-round", min=1),
    registry: bool = typer.Option(True, "--registry/--no-registry", help="Record the sweep in the SQLite registry"),
) -> None:
    """Sweep a classical reference code."""

    with _diagnostics():
        if code == "polar" and channel is not ChannelKind.AWGN:
            raise ConfigurationError("the polar baseline decodes AWGN LLRs; run it with --channel awgn")
        root_seed = settings.default_seed if seed is None else seed
        codec = _baseline_codec(code, k, n, component, polar_spec, design_snr, trials, root_seed)
        stop = _stop_rule(min_block_errors, max_blocks, blocks_per_round)
        _run_sweep(codec, channel, snrs, csv_path, root_seed, shards, stop, registry)


def _experiment_plan(config: RunConfig, kind: ExperimentKind, overrides: dict) -> ExperimentPlan:
    base = config.experiment.model_dump() if config.experiment is not None else {}
    given = {key: value for key, value in overrides.items() if value is not None}
    return ExperimentPlan.model_validate({**base, **given, "kind": kind})


def _write_report(report: RobustnessReport | AdaptivityReport, directory: Path) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    for label, result in report.sweeps().items():
        write_sweep_csv(result, directory / f"{label}.csv")
        _print_sweep(result, title=label)
    history = report.history if isinstance(report, AdaptivityReport) else report.fine_tune_history
    write_history_jsonl(history, directory / "history.jsonl")
    (directory / "report.json").write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")


def _experiment(
    kind: ExperimentKind,
    checkpoint: Path,
    config_path: Path,
    out: Optional[Path],
    overrides: dict,
    seed: Optional[int],
    shards: Optional[int],
    registry: bool,
    sub_batches: Optional[int] = None,
    sub_batch_size: Optional[int] = None,
) -> None:
    with _diagnostics(), _registry(registry) as repository:
        config = _with_output(load_run_config(config_path), out, seed)
        if sub_batches is not None or sub_batch_size is not None:
            overrides = {
                **overrides,
                "large_batch": FineTunePlan(
                    sub_batches=sub_batches or 1,
                    sub_batch_size=sub_batch_size or config.training.batch_size,
                ),
            }
        plan = _experiment_plan(config, kind, overrides)
        model = load_checkpoint(checkpoint).model
        report = ExperimentUseCase(repository).execute(
            model,
            plan,
            config.training,
            config.training.seed,
            shards or settings.sweep_shards,
            dump_run_config(config),
        )
        _write_report(report, config.output.directory)
        typer.secho(f"{kind.value} results written to {config.output.directory}", fg=typer.colors.GREEN)


@app.command()
def robustness(
    checkpoint: Path = typer.Option(..., "--checkpoint", exists=True, readable=True, help="Trained model"),
    config_path: Path = typer.Option(..., "--config", exists=True, readable=True, help="JSON run config"),
    out: Optional[Path] = typer.Option(None, "--out", help="Output directory (overrides the config)"),
    train_channel: Optional[ChannelKind] = typer.Option(None, "--train-channel"),
    test_channel: Optional[ChannelKind] = typer.Option(None, "--test-channel"),
    fine_tune_epochs: Optional[int] = typer.Option(None, "--fine-tune-epochs", min=0),
    sub_batches: Optional[int] = typer.Option(None, "--sub-batches", min=1, help="Sub-batches accumulated per fine-tuning step (L)"),
    sub_batch_size: Optional[int] = typer.Option(None, "--sub-batch-size", min=1, help="Words per fine-tuning sub-batch (B_s)"),
    snrs: Optional[str] = typer.Option(None, "--snrs", help="SNR grid lo:hi:step (dB)"),
    seed: Optional[int] = typer.Option(None, "--seed"),
    shards: Optional[int] = typer.Option(None, "--shards", min=1),
    registry: bool = typer.Option(True, "--registry/--no-registry"),
) -> None:
    """Evaluate a model on its training channel and on a different test channel."""

    overrides = {
        "train_channel": train_channel,
        "test_channel": test_channel,
        "fine_tune_epochs": fine_tune_epochs,
        "snrs": None if snrs is None else parse_snr_grid(snrs),
    }
    _experiment(
        ExperimentKind.ROBUSTNESS, checkpoint, config_path, out, overrides, seed, shards, registry, sub_batches, sub_batch_size
    )


@app.command()
def adaptivity(
    checkpoint: Path = typer.Option(..., "--checkpoint", exists=True, readable=True, help="Trained model"),
    config_path: Path = typer.Option(..., "--config", exists=True, readable=True, help="JSON run config"),
    out: Optional[Path] = typer.Option(None, "--out", help="Output directory (overrides the config)"),
    old_channel: Optional[ChannelKind] = typer.Option(None, "--old-channel"),
    new_channel: Optional[ChannelKind] = typer.Option(None, "--new-channel"),
    fine_tune_epochs: Optional[int] = typer.Option(None, "--fine-tune-epochs", min=1),
    sub_batches: Optional[int] = typer.Option(None, "--sub-batches", min=1, help="Sub-batches accumulated per fine-tuning step (L)"),
    sub_batch_size: Optional[int] = typer.Option(None, "--sub-batch-size", min=1, help="Words per fine-tuning sub-batch (B_s)"),
    from_scratch: Optional[bool] = typer.Option(None, "--from-scratch/--from-checkpoint"),
    snrs: Optional[str] = typer.Option(None, "--snrs", help="SNR grid lo:hi:step (dB)"),
    seed: Optional[int] = typer.Option(None, "--seed"),
    shards: Optional[int] = typer.Option(None, "--shards", min=1),
    registry: bool = typer.Option(True, "--registry/--no-registry"),
) -> None:
    """Adapt a model to a new channel for a few epochs and compare both channels."""

    overrides = {
        "train_channel": old_channel,
        "test_channel": new_channel,
        "fine_tune_epochs": fine_tune_epochs,
        "retrain_from_scratch": from_scratch,
        "snrs": None if snrs is None else parse_snr_grid(snrs),
    }
    _experiment(
        ExperimentKind.ADAPTIVITY, checkpoint, config_path, out, overrides, seed, shards, registry, sub_batches, sub_batch_size
    )


@app.command("construct-polar")
def construct_polar(
    n: int = typer.Option(..., "--n", min=1, help="Transmitted length"),
    k: int = typer.Option(..., "--k", min=1, help="Dimension"),
    design_snr: float = typer.Option(0.0, "--design-snr", help="Design SNR (dB)"),
    trials: int = typer.Option(100_000, "--trials", min=1, help="Genie-aided SC trials"),
    seed: Optional[int] = typer.Option(None, "--seed"),
    out: Path = typer.Option(..., "--out", help="PolarSpec JSON output"),
    bit_channels: Optional[Path] = typer.Option(None, "--bit-channels-csv", help="Per-bit-channel error rates"),
) -> None:
    """Genie-aided construction of a (punctured) polar code."""

    with _diagnostics():
        spec = ConstructPolarUseCase().execute(
            n, k, design_snr, trials, settings.default_seed if seed is None else seed, out, bit_channels
        )
        typer.secho(
            f"Polar ({spec.length},{spec.dimension}) from N={spec.mother_length}: info set {spec.info_set}",
            fg=typer.colors.GREEN,
        )


@app.command("export-curves")
def export_curves(
    inputs: List[Path] = typer.Argument(..., exists=True, readable=True, help="Sweep CSV files"),
    out: Path = typer.Option(..., "--out", help="Merged CSV"),
    label: List[str] = typer.Option([], "--label", help="Curve labels, one per input (default: file stem)"),
) -> None:
    """Merge sweep CSVs into one table with a leading label column."""

    with _diagnostics():
        merge_sweep_csvs(inputs, out, label or None)
        typer.secho(f"Merged {len(inputs)} curves into {out}", fg=typer.colors.GREEN)


if __name__ == "__main__":
    app()
