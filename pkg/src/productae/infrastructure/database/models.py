"""SQLAlchemy Core tables of the results registry."""
from __future__ import annotations

from datetime import datetime

from sqlalchemy import (
    Boolean,
    Column,
    DateTime,
    Float,
    ForeignKey,
    Integer,
    MetaData,
    String,
    Table,
    Text,
    UniqueConstraint,
)

metadata_obj = MetaData()


runs = Table(
    "runs",
    metadata_obj,
    Column("id", Integer, primary_key=True, autoincrement=True),
    Column("kind", String(32), nullable=False),
    Column("config", Text, nullable=False, default="{}"),
    Column("seed", Integer, nullable=False),
    Column("started_at", DateTime, nullable=False, default=datetime.utcnow),
)


epochs = Table(
    "epochs",
    metadata_obj,
    Column("id", Integer, primary_key=True, autoincrement=True),
    Column("run_id", Integer, ForeignKey("runs.id", ondelete="CASCADE"), nullable=False),
    Column("epoch", Integer, nullable=False),
    Column("phase", String(32), nullable=False),
    Column("train_loss", Float),
    Column("decoder_steps", Integer, nullable=False, default=0),
    Column("encoder_steps", Integer, nullable=False, default=0),
    Column("validation", Text, nullable=False, default="{}"),
    Column("wall_time_s", Float, nullable=False, default=0.0),
    UniqueConstraint("run_id", "epoch", name="uq_epochs_run_epoch"),
)


sweep_points = Table(
    "sweep_points",
    metadata_obj,
    Column("id", Integer, primary_key=True, autoincrement=True),
    Column("run_id", Integer, ForeignKey("runs.id", ondelete="CASCADE"), nullable=False),
    Column("label", String(128), nullable=False),
    Column("codec", String(128), nullable=False),
    Column("channel", String(32), nullable=False),
    Column("seed", Integer, nullable=False),
    Column("shards", Integer, nullable=False, default=1),
    Column("snr_db", Float, nullable=False),
    Column("k", Integer, nullable=False),
    Column("trials", Integer, nullable=False),
    Column("bit_errors", Integer, nullable=False),
    Column("block_errors", Integer, nullable=False),
    Column("capped", Boolean, nullable=False, default=False),
    UniqueConstraint("run_id", "label", "snr_db", name="uq_sweep_points_run_label_snr"),
)
