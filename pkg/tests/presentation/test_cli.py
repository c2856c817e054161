from __future__ import annotations

import json
from pathlib import Path

import pytest
import typer
from typer.testing import CliRunner

from productae.infrastructure.persistence.checkpoint_file import CheckpointMeta, load_checkpoint, save_checkpoint
from productae.infrastructure.persistence.results_csv import read_history_jsonl, read_sweep_rows
from productae.infrastructure.services.neural_codec import ProductAeModel
from productae.presentation.cli.app import app, parse_snr_grid

runner = CliRunner()

SMALL_NET = {"hidden_layers": 1, "hidden_width": 8}


def write_config(directory: Path, epochs: int = 1, **training) -> Path:
    document = {
        "code": {
            "n1": 4,
            "k1": 2,
            "n2": 4,
            "k2": 2,
            "iterations": 2,
            "features": 2,
            "encoder1": SMALL_NET,
            "encoder2": SMALL_NET,
            "decoder": SMALL_NET,
            "last_decoder": None,
        },
        "training": {
            "epochs": epochs,
            "batch_size": 16,
            "enc_iterations": 1,
            "dec_iterations": 2,
            "validation": {"snrs": [1.0, 2.0], "words": 32, "chunk_size": 16},
            "seed": 3,
            **training,
        },
        "experiment": {"snrs": [1.0], "stop": {"min_block_errors": 1000, "max_blocks": 32, "blocks_per_round": 16}},
        "output": {"directory": str(directory / "run")},
    }
    path = directory / "config.json"
    path.write_text(json.dumps(document), encoding="utf-8")
    return path


def invoke(*args: str):
    return runner.invoke(app, [str(arg) for arg in args])


@pytest.mark.parametrize(
    ("text", "grid"),
    [
        ("0:4:1", [0.0, 1.0, 2.0, 3.0, 4.0]),
        ("0:1:0.25", [0.0, 0.25, 0.5, 0.75, 1.0]),
        ("0:0.3:0.1", [0.0, 0.1, 0.2, 0.3]),
        ("1:2:0.3", [1.0, 1.3, 1.6, 1.9]),
        ("-1,0.5,2", [-1.0, 0.5, 2.0]),
        ("3", [3.0]),
    ],
)
def test_parse_snr_grid(text: str, grid: list[float]) -> None:
    assert parse_snr_grid(text) == pytest.approx(grid)


@pytest.mark.parametrize("text", ["0:4:0", "4:0:1", "2,1", "a:b:c", ""])
def test_parse_snr_grid_rejects(text: str) -> None:
    with pytest.raises(typer.BadParameter):
        parse_snr_grid(text)


def test_train_zero_epochs_writes_initial_checkpoint(tmp_path: Path) -> None:
    config = write_config(tmp_path, epochs=0)
    result = invoke("train", "--config", config, "--no-registry")
    assert result.exit_code == 0, result.output
    run = tmp_path / "run"
    assert (run / "epoch-0000.pae").exists()
    assert (run / "best.pae").exists()
    assert [r.phase for r in read_history_jsonl(run / "history.jsonl")] == ["init"]
    assert json.loads((run / "config.json").read_text(encoding="utf-8"))["training"]["epochs"] == 0


def test_train_then_finetune(tmp_path: Path) -> None:
    config = write_config(tmp_path)
    assert invoke("train", "--config", config, "--no-registry").exit_code == 0
    trained = tmp_path / "run" / "epoch-0001.pae"
    assert load_checkpoint(trained).optimizer is not None

    out = tmp_path / "tuned"
    result = invoke(
        "finetune", "--checkpoint", trained, "--config", config, "--out", out,
        "--sub-batches", 2, "--sub-batch-size", 8, "--epochs", 1, "--no-registry",
    )
    assert result.exit_code == 0, result.output
    history = read_history_jsonl(out / "history.jsonl")
    assert [r.phase for r in history] == ["init", "fine_tune"]
    assert load_checkpoint(out / "epoch-0001.pae").optimizer["decoder"].step_count == 4


def test_finetune_needs_epochs(tmp_path: Path) -> None:
    config = write_config(tmp_path, epochs=0)
    invoke("train", "--config", config, "--no-registry")
    result = invoke("finetune", "--checkpoint", tmp_path / "run" / "best.pae", "--config", config, "--no-registry")
    assert result.exit_code == 1
    assert "at least one epoch" in result.output


def test_eval_writes_one_row_per_grid_point(tmp_path: Path, tiny_model: ProductAeModel) -> None:
    checkpoint = save_checkpoint(tiny_model, CheckpointMeta(), tmp_path / "model.pae")
    csv_path = tmp_path / "curve.csv"
    result = invoke(
        "eval", "--checkpoint", checkpoint, "--snrs", "0:4:1", "--csv", csv_path,
        "--max-blocks", 64, "--blocks-per-round", 32, "--no-registry",
    )
    assert result.exit_code == 0, result.output
    rows = read_sweep_rows(csv_path)
    assert [float(row["snr_db"]) for row in rows] == [0.0, 1.0, 2.0, 3.0, 4.0]


def test_eval_rejects_a_bad_grid(tmp_path: Path, tiny_model: ProductAeModel) -> None:
    checkpoint = save_checkpoint(tiny_model, CheckpointMeta(), tmp_path / "model.pae")
    result = invoke("eval", "--checkpoint", checkpoint, "--snrs", "4:0:1", "--no-registry")
    assert result.exit_code == 2


def test_eval_reports_corrupt_checkpoints(tmp_path: Path) -> None:
    checkpoint = tmp_path / "broken.pae"
    checkpoint.write_bytes(b"not a checkpoint")
    result = invoke("eval", "--checkpoint", checkpoint, "--snrs", "0", "--no-registry")
    assert result.exit_code == 1
    assert "magic" in result.output


def test_uncoded_baseline(tmp_path: Path) -> None:
    csv_path = tmp_path / "uncoded.csv"
    result = invoke(
        "baseline", "--code", "uncoded", "--k", 8, "--snrs", "0,2", "--csv", csv_path,
        "--max-blocks", 500, "--min-block-errors", 10, "--no-registry",
    )
    assert result.exit_code == 0, result.output
    rows = read_sweep_rows(csv_path)
    assert float(rows[0]["ber"]) > float(rows[1]["ber"])


def test_product_baseline_and_missing_arguments(tmp_path: Path) -> None:
    result = invoke(
        "baseline", "--code", "product", "--component", "spc:2", "--component", "spc:2",
        "--snrs", "3", "--max-blocks", 64, "--no-registry",
    )
    assert result.exit_code == 0, result.output
    assert invoke("baseline", "--code", "product", "--snrs", "3", "--no-registry").exit_code == 1
    assert invoke("baseline", "--code", "ldpc", "--snrs", "3", "--no-registry").exit_code == 1


def test_construct_polar_then_baseline(tmp_path: Path) -> None:
    spec_path = tmp_path / "polar.json"
    bits_path = tmp_path / "bits.csv"
    result = invoke(
        "construct-polar", "--n", 12, "--k", 6, "--design-snr", 2.0, "--trials", 500,
        "--seed", 1, "--out", spec_path, "--bit-channels-csv", bits_path,
    )
    assert result.exit_code == 0, result.output
    assert json.loads(spec_path.read_text(encoding="utf-8"))["mother_length"] == 16
    assert len(bits_path.read_text(encoding="utf-8").splitlines()) == 17
    result = invoke(
        "baseline", "--code", "polar", "--polar-spec", spec_path, "--snrs", "2", "--max-blocks", 64, "--no-registry"
    )
    assert result.exit_code == 0, result.output


def test_robustness_and_adaptivity_commands(tmp_path: Path) -> None:
    config = write_config(tmp_path)
    invoke("train", "--config", config, "--no-registry")
    checkpoint = tmp_path / "run" / "best.pae"

    robust = tmp_path / "robust"
    result = invoke(
        "robustness", "--checkpoint", checkpoint, "--config", config, "--out", robust,
        "--test-channel", "rayleigh", "--no-registry",
    )
    assert result.exit_code == 0, result.output
    assert (robust / "base-rayleigh.csv").exists() and (robust / "report.json").exists()

    adapt = tmp_path / "adapt"
    result = invoke(
        "adaptivity", "--checkpoint", checkpoint, "--config", config, "--out", adapt,
        "--new-channel", "rayleigh", "--fine-tune-epochs", 1, "--snrs", "0:1:1", "--no-registry",
    )
    assert result.exit_code == 0, result.output
    assert len(read_sweep_rows(adapt / "after-rayleigh.csv")) == 2
    assert [r.phase for r in read_history_jsonl(adapt / "history.jsonl")] == ["init", "train"]


def test_export_curves(tmp_path: Path) -> None:
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    for path in (first, second):
        invoke("baseline", "--code", "uncoded", "--k", 4, "--snrs", "1", "--csv", path, "--max-blocks", 32, "--no-registry")
    out = tmp_path / "merged.csv"
    result = invoke("export-curves", first, second, "--out", out, "--label", "one", "--label", "two")
    assert result.exit_code == 0, result.output
    assert [line.split(",")[0] for line in out.read_text(encoding="utf-8").splitlines()] == ["label", "one", "two"]


def test_polar_baseline_is_awgn_only(tmp_path: Path) -> None:
    result = invoke(
        "baseline", "--code", "polar", "--n", 8, "--k", 4, "--trials", 100, "--snrs", "2",
        "--channel", "rayleigh", "--no-registry",
    )
    assert result.exit_code == 1
    assert "--channel awgn" in result.output


def test_robustness_fine_tunes_with_large_batches(tmp_path: Path) -> None:
    config = write_config(tmp_path)
    invoke("train", "--config", config, "--no-registry")
    out = tmp_path / "robust"
    result = invoke(
        "robustness", "--checkpoint", tmp_path / "run" / "best.pae", "--config", config, "--out", out,
        "--fine-tune-epochs", 1, "--sub-batches", 2, "--sub-batch-size", 8, "--no-registry",
    )
    assert result.exit_code == 0, result.output
    assert [r.phase for r in read_history_jsonl(out / "history.jsonl")] == ["init", "fine_tune"]
    report = json.loads((out / "report.json").read_text(encoding="utf-8"))
    assert report["tuned_on_train_channel"] is not None
