"""JSON run-config documents."""
from __future__ import annotations

from pathlib import Path
from typing import Optional

from pydantic import Field

from productae.domain.entities import ChannelSpec, ConfigModel, ExperimentPlan, ProductAeSpec, TrainConfig


class OutputPaths(ConfigModel):
    directory: Path = Path("runs/default")
    history: str = "history.jsonl"
    checkpoint_pattern: str = "epoch-{epoch:04d}.pae"
    best_checkpoint: str = "best.pae"

    def checkpoint(self, epoch: int) -> Path:
        return self.directory / self.checkpoint_pattern.format(epoch=epoch)


class RunConfig(ConfigModel):
    """Everything one CLI run needs; unknown keys are rejected at every level."""

    code: ProductAeSpec
    training: TrainConfig = Field(default_factory=TrainConfig)
    channel: ChannelSpec = Field(default_factory=ChannelSpec)
    experiment: Optional[ExperimentPlan] = None
    output: OutputPaths = Field(default_factory=OutputPaths)


def parse_run_config(text: str) -> RunConfig:
    return RunConfig.model_validate_json(text)


def dump_run_config(config: RunConfig) -> str:
    """Serialized with every default spelled out."""
    return config.model_dump_json(indent=2)


def load_run_config(path: Path) -> RunConfig:
    return parse_run_config(Path(path).read_text(encoding="utf-8"))


def save_run_config(config: RunConfig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dump_run_config(config) + "\n", encoding="utf-8")
    return path
