import json
import os

import pytest

from app.main import run_application
from app.models import load_checkpoint
from app.utils import constants

SMALL = ["--days", "62", "--dmas", "2", "--start", "2018-12-01", "--seed", "11"]


def run(workdir, *args):
    return run_application(list(args) + ["--workdir", str(workdir)])


def read_bytes(path):
    with open(path, "rb") as f:
        return f.read()


def test_no_arguments_is_a_usage_error(capsys):
    assert run_application([]) == constants.EXIT_USAGE_ERROR
    assert "usage" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["launch"],
    ["train"],
    ["train", "--model", "gru"],
    ["synth", "--days", "many"],
])
def test_bad_command_lines_exit_with_usage_code(argv):
    assert run_application(argv) == constants.EXIT_USAGE_ERROR


def test_synth_is_reproducible(tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    assert run(first, "synth", "--days", "21", "--seed", "42") == constants.EXIT_OK
    assert run(second, "synth", "--days", "21", "--seed", "42") == constants.EXIT_OK
    for name in (constants.DEFAULT_METER_CSV, constants.DEFAULT_WEATHER_CSV):
        assert read_bytes(first / name) == read_bytes(second / name)


def test_data_errors_exit_with_data_code(tmp_path):
    assert run(tmp_path, "preprocess") == constants.EXIT_DATA_ERROR
    assert run(tmp_path, "evaluate") == constants.EXIT_DATA_ERROR
    assert run(tmp_path, "synth", "--days", "5") == constants.EXIT_DATA_ERROR


def test_settings_file_and_bad_rows(tmp_path):
    settings = tmp_path / "run.env"
    settings.write_text("DMA_COUNT = 1\nN_DAYS = 21\n")
    assert run_application(["synth", "--config", str(settings), "--workdir", str(tmp_path)]) == 0
    with open(tmp_path / constants.DEFAULT_METER_CSV, "a") as f:
        f.write("garbage,M,DMA01,1\n")
    assert run(tmp_path, "preprocess") == constants.EXIT_OK
    assert (tmp_path / "ingest_errors.csv").exists()
    assert (tmp_path / constants.DEFAULT_DEMAND_CLEAN_CSV).exists()


def pipeline(workdir, model="fprime"):
    steps = [
        ["synth"] + SMALL,
        ["preprocess"],
        ["decompose"],
        ["train", "--model", model, "--epochs", "2", "--seed", "3"],
        ["evaluate", "--model", model],
    ]
    for step in steps:
        assert run(workdir, *step) == constants.EXIT_OK, step


def test_end_to_end(tmp_path):
    pipeline(tmp_path)
    assert (tmp_path / "model_fprime.ckpt").exists()
    assert (tmp_path / "history_fprime.csv").read_text().startswith("epoch,train_loss,val_loss\n")
    with open(tmp_path / "metrics_fprime.json") as f:
        metrics = json.load(f)
    assert sorted(metrics) == ["fprime", "persistence"]
    assert metrics["fprime"]["aggregate"]["windows"] == 62
    assert sorted(metrics["persistence"]["per_dma"]) == ["DMA01", "DMA02"]

    forecasts = tmp_path / "forecasts_fprime.csv"
    assert len(forecasts.read_text().splitlines()) == 1 + 2 * 62 * 24
    assert run(tmp_path, "forecast", "--origin", "2019-01-15") == constants.EXIT_OK
    assert (tmp_path / "forecast_fprime_20190115.csv").exists()
    assert run(tmp_path, "forecast", "--origin", "2030-01-01") == constants.EXIT_DATA_ERROR
    assert run(tmp_path, "plot-data") == constants.EXIT_OK
    week = (tmp_path / "plot_week_fprime.csv").read_text().splitlines()
    assert len(week) == 1 + 2 * 7 * 24
    assert (tmp_path / "dma_metrics.csv").read_text().splitlines()[0].startswith("dma_id,model,mae_mean")
    assert run(tmp_path, "decompose", "--forecasts", str(forecasts)) == constants.EXIT_OK
    assert os.path.getsize(tmp_path / "decomposition_forecasts.csv") > 0


def test_identical_runs_give_identical_metrics(tmp_path):
    pipeline(tmp_path / "a", "lstm")
    pipeline(tmp_path / "b", "lstm")
    assert read_bytes(tmp_path / "a" / "metrics_lstm.json") == read_bytes(tmp_path / "b" / "metrics_lstm.json")


def test_grid_over_positional_encodings(tmp_path):
    settings = tmp_path / "grid.env"
    settings.write_text("GRID_POSITIONAL = learned,sinusoidal\nGRID_LEARNING_RATE = 0.01\n")
    assert run(tmp_path, "synth", *SMALL) == constants.EXIT_OK
    assert run(tmp_path, "preprocess") == constants.EXIT_OK
    assert run_application(["train", "--model", "fprime", "--epochs", "1", "--grid", "--config", str(settings),
                            "--workdir", str(tmp_path)]) == constants.EXIT_OK
    model = load_checkpoint(str(tmp_path / "model_fprime.ckpt"))
    assert model.config.positional in ("learned", "sinusoidal")
    assert ("endo_pos" in model.params) == (model.config.positional == "learned")
