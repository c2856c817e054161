"""Outcome records of the channel robustness and adaptivity experiments."""
from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, Field

from .entities import ChannelKind
from .ledger import EpochRecord
from .stats import SweepResult


class RobustnessReport(BaseModel):
    """A model trained on one channel, evaluated on it and on another."""

    train_channel: ChannelKind
    test_channel: ChannelKind
    on_train_channel: SweepResult
    on_test_channel: SweepResult
    tuned_on_train_channel: Optional[SweepResult] = None
    tuned_on_test_channel: Optional[SweepResult] = None
    fine_tune_history: list[EpochRecord] = Field(default_factory=list)

    def sweeps(self) -> dict[str, SweepResult]:
        labelled = {
            f"base-{self.train_channel.value}": self.on_train_channel,
            f"base-{self.test_channel.value}": self.on_test_channel,
        }
        if self.tuned_on_train_channel is not None:
            labelled[f"tuned-{self.train_channel.value}"] = self.tuned_on_train_channel
        if self.tuned_on_test_channel is not None:
            labelled[f"tuned-{self.test_channel.value}"] = self.tuned_on_test_channel
        return labelled


class AdaptivityReport(BaseModel):
    """Performance on the old and new channel before and after adapting to the new one."""

    old_channel: ChannelKind
    new_channel: ChannelKind
    retrained_from_scratch: bool = False
    before_on_new: SweepResult
    before_on_old: SweepResult
    after_on_new: SweepResult
    after_on_old: SweepResult
    history: list[EpochRecord] = Field(default_factory=list)

    def sweeps(self) -> dict[str, SweepResult]:
        return {
            f"before-{self.new_channel.value}": self.before_on_new,
            f"before-{self.old_channel.value}": self.before_on_old,
            f"after-{self.new_channel.value}": self.after_on_new,
            f"after-{self.old_channel.value}": self.after_on_old,
        }
