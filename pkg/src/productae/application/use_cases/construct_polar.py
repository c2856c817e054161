"""Genie-aided polar code construction, persisted as a JSON PolarSpec."""
from __future__ import annotations

import logging
from pathlib import Path
from typing import Optional

from productae.domain.entities import PolarSpec
from productae.infrastructure.persistence.results_csv import export_bit_channel_csv
from productae.infrastructure.services.polar import polar_construct

logger = logging.getLogger(__name__)


def load_polar_spec(path: Path) -> PolarSpec:
    return PolarSpec.model_validate_json(Path(path).read_text(encoding="utf-8"))


def save_polar_spec(spec: PolarSpec, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(spec.model_dump_json(indent=2) + "\n", encoding="utf-8")
    return path


class ConstructPolarUseCase:
    def execute(
        self,
        length: int,
        dimension: int,
        design_snr_db: float,
        trials: int,
        seed: int,
        out: Optional[Path] = None,
        bit_channels_csv: Optional[Path] = None,
    ) -> PolarSpec:
        spec = polar_construct(length, dimension, design_snr_db, trials, seed)
        if out is not None:
            save_polar_spec(spec, out)
            logger.info("wrote polar spec to %s", out)
        if bit_channels_csv is not None:
            export_bit_channel_csv(spec, bit_channels_csv)
        return spec
