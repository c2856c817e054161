"""SQLite results registry via SQLAlchemy."""
from __future__ import annotations

import json
from pathlib import Path
from typing import Sequence

from sqlalchemy import create_engine, select, text
from sqlalchemy.dialects.sqlite import insert
from sqlalchemy.engine import Engine

from productae.domain.entities import ChannelKind
from productae.domain.ledger import EpochRecord
from productae.domain.services import ResultRepository
from productae.domain.stats import ErrorStats, SweepPoint, SweepResult

from . import models


class SQLAlchemyResultRepository(ResultRepository):
    """ResultRepository implementation backed by SQLAlchemy Core."""

    def __init__(self, db_path: Path) -> None:
        self._db_path = db_path
        self._db_path.parent.mkdir(parents=True, exist_ok=True)
        self._engine: Engine = create_engine(
            f"sqlite:///{self._db_path}", future=True, echo=False, pool_pre_ping=True
        )
        with self._engine.connect() as conn:
            conn.execute(text("PRAGMA foreign_keys=ON"))
        # Ensure tables exist for initial runs; Alembic can take over afterward.
        models.metadata_obj.create_all(self._engine)

    def dispose(self) -> None:
        self._engine.dispose()

    def start_run(self, kind: str, config_json: str, seed: int) -> int:
        with self._engine.begin() as conn:
            result = conn.execute(insert(models.runs).values(kind=kind, config=config_json, seed=seed))
            return int(result.inserted_primary_key[0])

    def save_epochs(self, run_id: int, records: Sequence[EpochRecord]) -> None:
        if not records:
            return
        with self._engine.begin() as conn:
            for record in records:
                validation = {repr(snr): stats.model_dump() for snr, stats in record.validation.items()}
                conn.execute(
                    insert(models.epochs).values(
                        run_id=run_id,
                        epoch=record.epoch,
                        phase=record.phase,
                        train_loss=record.train_loss,
                        decoder_steps=record.decoder_steps,
                        encoder_steps=record.encoder_steps,
                        validation=json.dumps(validation),
                        wall_time_s=record.wall_time_s,
                    )
                )

    def load_epochs(self, run_id: int) -> list[EpochRecord]:
        stmt = select(models.epochs).where(models.epochs.c.run_id == run_id).order_by(models.epochs.c.epoch)
        with self._engine.connect() as conn:
            rows = conn.execute(stmt).mappings().all()
        return [
            EpochRecord(
                epoch=row["epoch"],
                phase=row["phase"],
                train_loss=row["train_loss"],
                decoder_steps=row["decoder_steps"],
                encoder_steps=row["encoder_steps"],
                validation={float(snr): ErrorStats(**stats) for snr, stats in json.loads(row["validation"]).items()},
                wall_time_s=row["wall_time_s"],
            )
            for row in rows
        ]

    def save_sweep(self, run_id: int, label: str, result: SweepResult) -> None:
        with self._engine.begin() as conn:
            for point in result.points:
                conn.execute(
                    insert(models.sweep_points)
                    .values(
                        run_id=run_id,
                        label=label,
                        codec=result.codec,
                        channel=result.channel.value,
                        seed=result.seed,
                        shards=result.shards,
                        snr_db=point.snr_db,
                        k=point.stats.k,
                        trials=point.stats.trials,
                        bit_errors=point.stats.bit_errors,
                        block_errors=point.stats.block_errors,
                        capped=point.capped,
                    )
                    .on_conflict_do_nothing(index_elements=["run_id", "label", "snr_db"])
                )

    def load_sweep(self, run_id: int, label: str) -> SweepResult:
        stmt = (
            select(models.sweep_points)
            .where(models.sweep_points.c.run_id == run_id, models.sweep_points.c.label == label)
            .order_by(models.sweep_points.c.snr_db)
        )
        with self._engine.connect() as conn:
            rows = conn.execute(stmt).mappings().all()
        if not rows:
            raise KeyError(f"no sweep {label!r} recorded for run {run_id}")
        first = rows[0]
        return SweepResult(
            codec=first["codec"],
            channel=ChannelKind(first["channel"]),
            seed=first["seed"],
            shards=first["shards"],
            points=[
                SweepPoint(
                    snr_db=row["snr_db"],
                    stats=ErrorStats(
                        trials=row["trials"],
                        bit_errors=row["bit_errors"],
                        block_errors=row["block_errors"],
                        k=row["k"],
                    ),
                    capped=bool(row["capped"]),
                )
                for row in rows
            ],
        )

    def list_runs(self, limit: int = 20) -> list[dict]:
        stmt = select(models.runs).order_by(models.runs.c.id.desc()).limit(limit)
        with self._engine.connect() as conn:
            return [dict(row) for row in conn.execute(stmt).mappings().all()]
