"""CSV sweep results, merged curve tables, bit-channel tables and JSON-lines training history."""
from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Optional, Sequence

from productae.domain.entities import PolarSpec
from productae.domain.errors import ConfigurationError
from productae.domain.ledger import EpochRecord
from productae.domain.stats import SweepResult

SWEEP_COLUMNS = ["snr_db", "ber", "bler", "bit_errors", "block_errors", "trials", "capped"]


def sweep_rows(result: SweepResult) -> list[dict[str, str]]:
    return [
        {
            "snr_db": repr(point.snr_db),
            "ber": repr(point.stats.ber),
            "bler": repr(point.stats.bler),
            "bit_errors": str(point.stats.bit_errors),
            "block_errors": str(point.stats.block_errors),
            "trials": str(point.stats.trials),
            "capped": "true" if point.capped else "false",
        }
        for point in result.points
    ]


def write_sweep_csv(result: SweepResult, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(sweep_rows(result))
    return path


def read_sweep_rows(path: Path) -> list[dict[str, str]]:
    with Path(path).open(newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames != SWEEP_COLUMNS:
            raise ConfigurationError(f"{path} is not a sweep CSV (header {reader.fieldnames})")
        return list(reader)


def merge_sweep_csvs(paths: Sequence[Path], out: Path, labels: Optional[Sequence[str]] = None) -> Path:
    """Concatenate sweep CSVs under a leading `label` column (file stem unless labels are given)."""
    if labels is not None and len(labels) != len(paths):
        raise ConfigurationError("give one label per input file")
    names = list(labels) if labels is not None else [Path(p).stem for p in paths]
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=["label", *SWEEP_COLUMNS], lineterminator="\n")
        writer.writeheader()
        for name, path in zip(names, paths):
            for row in read_sweep_rows(Path(path)):
                writer.writerow({"label": name, **row})
    return out


def export_bit_channel_csv(spec: PolarSpec, path: Path) -> Path:
    """One row per bit channel: estimated error rate and role in the code."""
    if spec.construction is None:
        raise ConfigurationError("polar spec carries no construction estimates")
    info, punctured = set(spec.info_set), set(spec.punctured)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["index", "ber", "information", "punctured_position"])
        for index, ber in enumerate(spec.construction.bit_channel_ber):
            writer.writerow([index, repr(ber), int(index in info), int(index in punctured)])
    return path


def write_history_jsonl(records: Iterable[EpochRecord], path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        for record in records:
            handle.write(record.model_dump_json() + "\n")
    return path


def append_history_jsonl(record: EpochRecord, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("a", encoding="utf-8") as handle:
        handle.write(record.model_dump_json() + "\n")


def read_history_jsonl(path: Path) -> list[EpochRecord]:
    with Path(path).open(encoding="utf-8") as handle:
        return [EpochRecord.model_validate_json(line) for line in handle if line.strip()]
