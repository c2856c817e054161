"""Domain models for codes, channels, training runs and experiments."""
from __future__ import annotations

import math
from enum import Enum
from pathlib import Path
from typing import Annotated, Literal, Optional, Sequence, Union

from pydantic import BaseModel, ConfigDict, Field, PositiveInt, model_validator


class ConfigModel(BaseModel):
    """Base for every record that appears in a run-config file (unknown keys rejected)."""

    model_config = ConfigDict(extra="forbid")


class ChannelKind(str, Enum):
    """Simulated transmission channels."""

    AWGN = "awgn"
    RAYLEIGH = "rayleigh"


class PointSnr(ConfigModel):
    """A single SNR (dB) shared by the whole batch."""

    kind: Literal["point"] = "point"
    db: float

    def bounds(self) -> tuple[float, float]:
        return self.db, self.db

    @property
    def center(self) -> float:
        return self.db


class RangeSnr(ConfigModel):
    """Per-example SNRs drawn uniformly (in dB) from [lo, hi]."""

    kind: Literal["range"] = "range"
    lo: float
    hi: float

    @model_validator(mode="after")
    def _ordered(self) -> "RangeSnr":
        if self.lo > self.hi:
            raise ValueError(f"SNR range requires lo <= hi, got [{self.lo}, {self.hi}]")
        return self

    def bounds(self) -> tuple[float, float]:
        return self.lo, self.hi

    @property
    def center(self) -> float:
        return 0.5 * (self.lo + self.hi)


SnrPolicy = Annotated[Union[PointSnr, RangeSnr], Field(discriminator="kind")]


class ChannelSpec(ConfigModel):
    """Channel kind, SNR policy and the seed its noise stream derives from."""

    kind: ChannelKind = ChannelKind.AWGN
    snr: SnrPolicy = Field(default_factory=lambda: PointSnr(db=2.0))
    seed: int = 0


class NetShape(ConfigModel):
    """Hidden-layer count and width of one fully-connected network."""

    hidden_layers: int = Field(default=7, ge=0)
    hidden_width: PositiveInt = 200


class ProductAeSpec(ConfigModel):
    """Dimensions and network sizes of a two-dimensional ProductAE."""

    n1: PositiveInt
    k1: PositiveInt
    n2: PositiveInt
    k2: PositiveInt
    iterations: PositiveInt = 4
    features: PositiveInt = 3
    encoder1: NetShape = Field(default_factory=lambda: NetShape(hidden_layers=7, hidden_width=200))
    encoder2: NetShape = Field(default_factory=lambda: NetShape(hidden_layers=7, hidden_width=200))
    decoder: NetShape = Field(default_factory=lambda: NetShape(hidden_layers=7, hidden_width=250))
    last_decoder: Optional[NetShape] = Field(
        default_factory=lambda: NetShape(hidden_layers=9, hidden_width=250)
    )
    normalize_after_first_encoder: bool = False

    @property
    def n(self) -> int:
        return self.n1 * self.n2

    @property
    def k(self) -> int:
        return self.k1 * self.k2

    @property
    def rate(self) -> float:
        return self.k / self.n

    def decoder_shape(self, iteration: int) -> NetShape:
        """Hidden configuration of decoder pair `iteration` (1-based)."""
        if iteration == self.iterations and self.last_decoder is not None:
            return self.last_decoder
        return self.decoder


class ScheduleScheme(str, Enum):
    """Decoder schedule composition per epoch."""

    JOINT = "joint"
    SCHEME_I = "scheme_i"
    SCHEME_II = "scheme_ii"
    SCHEME_III = "scheme_iii"


class BatchPolicy(str, Enum):
    """When fresh message words are drawn during training."""

    FRESH_PER_ITERATION = "fresh_per_iteration"
    FRESH_PER_EPOCH = "fresh_per_epoch"


class FineTunePlan(ConfigModel):
    """Large-batch fine-tuning via gradient accumulation over L sub-batches of size B_s."""

    sub_batches: PositiveInt = 1
    sub_batch_size: PositiveInt = 5000
    epochs: int = Field(default=0, ge=0)
    reset_moments: bool = False

    @property
    def virtual_batch(self) -> int:
        return self.sub_batches * self.sub_batch_size


class ValidationPlan(ConfigModel):
    """Per-epoch validation grid, word budget and checkpoint criterion."""

    snrs: list[float] = Field(default_factory=lambda: [3.0])
    words: PositiveInt = 10_000
    chunk_size: PositiveInt = 5_000
    criterion_snr: Optional[float] = None

    @property
    def criterion(self) -> float:
        return self.criterion_snr if self.criterion_snr is not None else max(self.snrs)


class TrainConfig(ConfigModel):
    """Every knob of the alternating encoder/decoder training loop."""

    epochs: int = Field(default=100, ge=0)
    batch_size: PositiveInt = 5000
    enc_iterations: int = Field(default=100, ge=0)
    dec_iterations: int = Field(default=500, ge=0)
    encoder_snr: SnrPolicy = Field(default_factory=lambda: PointSnr(db=1.25))
    decoder_snr: Optional[SnrPolicy] = None
    lr_enc: float = Field(default=2e-4, gt=0)
    lr_dec: float = Field(default=2e-4, gt=0)
    scheme: ScheduleScheme = ScheduleScheme.JOINT
    pair_iterations: Optional[list[Annotated[int, Field(ge=0)]]] = None
    dec_start_iterations: Optional[int] = Field(default=None, ge=0)
    dec_end_iterations: Optional[int] = Field(default=None, ge=0)
    batch_policy: BatchPolicy = BatchPolicy.FRESH_PER_ITERATION
    fine_tune: FineTunePlan = Field(default_factory=FineTunePlan)
    l2: float = Field(default=0.0, ge=0)
    validation: ValidationPlan = Field(default_factory=ValidationPlan)
    seed: int = 0

    @model_validator(mode="after")
    def _default_decoder_range(self) -> "TrainConfig":
        if self.decoder_snr is None:
            gamma = self.encoder_snr.center
            self.decoder_snr = RangeSnr(lo=gamma - 2.5, hi=gamma + 1.0)
        return self

    @property
    def decoder_policy(self) -> Union[PointSnr, RangeSnr]:
        assert self.decoder_snr is not None
        return self.decoder_snr


class StopRule(ConfigModel):
    """Per-SNR Monte-Carlo termination: enough block errors or the trial cap."""

    min_block_errors: PositiveInt = 100
    max_blocks: PositiveInt = 1_000_000
    blocks_per_round: PositiveInt = 10_000


class ExperimentKind(str, Enum):
    SWEEP = "sweep"
    ROBUSTNESS = "robustness"
    ADAPTIVITY = "adaptivity"


class ExperimentPlan(ConfigModel):
    """Robustness / adaptivity / sweep experiment description."""

    kind: ExperimentKind = ExperimentKind.SWEEP
    checkpoint: Optional[Path] = None
    train_channel: ChannelKind = ChannelKind.AWGN
    test_channel: ChannelKind = ChannelKind.AWGN
    fine_tune_epochs: int = Field(default=0, ge=0)
    snrs: list[float] = Field(default_factory=lambda: [0.0, 1.0, 2.0, 3.0])
    stop: StopRule = Field(default_factory=StopRule)
    encoder_snr_shift: Optional[float] = None
    decoder_offsets: tuple[float, float] = (-3.0, 2.0)
    retrain_from_scratch: bool = False
    # when set, fine-tuning steps accumulate sub_batches × sub_batch_size words
    large_batch: Optional[FineTunePlan] = None

    @model_validator(mode="after")
    def _adaptivity_needs_epochs(self) -> "ExperimentPlan":
        if self.kind is ExperimentKind.ADAPTIVITY and self.fine_tune_epochs < 1:
            raise ValueError("adaptivity experiments require fine_tune_epochs >= 1")
        lo, hi = self.decoder_offsets
        if lo > hi:
            raise ValueError("decoder_offsets must be ordered (lo, hi)")
        return self

    @property
    def snr_shift(self) -> float:
        if self.encoder_snr_shift is not None:
            return self.encoder_snr_shift
        return 3.75 if self.kind is ExperimentKind.ADAPTIVITY else 2.75


def gf2_rank(rows: Sequence[Sequence[int]]) -> int:
    """Rank over GF(2) by elimination on integer bitmasks."""
    pivots: dict[int, int] = {}
    for row in rows:
        value = 0
        for bit in row:
            value = (value << 1) | (int(bit) & 1)
        while value:
            top = value.bit_length() - 1
            if top not in pivots:
                pivots[top] = value
                break
            value ^= pivots[top]
    return len(pivots)


class LinearCodeSpec(ConfigModel):
    """Binary linear block code given by a full-row-rank generator matrix."""

    name: str = "linear"
    generator: list[list[Annotated[int, Field(ge=0, le=1)]]]

    @model_validator(mode="after")
    def _full_rank(self) -> "LinearCodeSpec":
        widths = {len(row) for row in self.generator}
        if not self.generator or len(widths) != 1 or 0 in widths:
            raise ValueError("generator must be a non-empty rectangular matrix")
        if gf2_rank(self.generator) != len(self.generator):
            raise ValueError(f"generator of {self.name} is not full row rank over GF(2)")
        return self

    @property
    def k(self) -> int:
        return len(self.generator)

    @property
    def n(self) -> int:
        return len(self.generator[0])


class ProductCodeSpec(ConfigModel):
    """Ordered component codes of a classical product code."""

    components: list[LinearCodeSpec] = Field(min_length=1)

    @property
    def n(self) -> int:
        return math.prod(code.n for code in self.components)

    @property
    def k(self) -> int:
        return math.prod(code.k for code in self.components)

    @property
    def rate(self) -> float:
        return self.k / self.n


class PolarConstruction(ConfigModel):
    """How the information set was chosen."""

    design_snr_db: float
    trials: PositiveInt
    seed: int
    bit_channel_ber: list[float]
    degenerate: bool = False


class PolarSpec(ConfigModel):
    """Punctured polar code: mother length N = 2^m0, transmitted length n, dimension k."""

    mother_length: PositiveInt
    length: PositiveInt
    dimension: PositiveInt
    info_set: list[int]
    punctured: list[int] = Field(default_factory=list)
    construction: Optional[PolarConstruction] = None

    @model_validator(mode="after")
    def _consistent(self) -> "PolarSpec":
        big_n, n, k = self.mother_length, self.length, self.dimension
        if big_n & (big_n - 1):
            raise ValueError(f"mother length must be a power of two, got {big_n}")
        if not k <= n <= big_n:
            raise ValueError(f"need k <= n <= N, got k={k}, n={n}, N={big_n}")
        if big_n != 1 << max(0, math.ceil(math.log2(n))):
            raise ValueError(f"mother length {big_n} is not 2^ceil(log2 {n})")
        if len(self.info_set) != k or len(set(self.info_set)) != k:
            raise ValueError("information set must hold k distinct indices")
        if len(self.punctured) != big_n - n or len(set(self.punctured)) != big_n - n:
            raise ValueError("puncture pattern must hold N - n distinct indices")
        for index in (*self.info_set, *self.punctured):
            if not 0 <= index < big_n:
                raise ValueError(f"index {index} outside [0, {big_n})")
        return self

    @property
    def frozen_mask(self) -> list[bool]:
        info = set(self.info_set)
        return [i not in info for i in range(self.mother_length)]
