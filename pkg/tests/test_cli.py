"""
End-to-end tests of the command line: synthetic data in, artifacts and exit codes out.
"""
import csv

import pytest

import main
from services.errors import EXIT_DATA, EXIT_OK, EXIT_USAGE


@pytest.fixture
def data_dir(tmp_path):
    data = tmp_path / "data"
    assert main.main(["synth", "--out", str(data), "--seed", "7"]) == EXIT_OK
    return data


def run(data_dir, out, *args) -> int:
    return main.main(list(args) + ["--data-dir", str(data_dir), "--out", str(out)])


def read_rows(path):
    with open(path, newline="") as handle:
        return list(csv.reader(handle))


class TestSynth:

    def test_writes_both_series(self, data_dir):
        assert read_rows(data_dir / "visitors.csv")[0] == ["month", "value"]
        assert len(read_rows(data_dir / "visitors.csv")) == 169
        assert len(read_rows(data_dir / "google_trend.csv")) == 169
        assert "seed = 7" in (data_dir / "run_config.txt").read_text()

    def test_too_few_months(self, tmp_path):
        assert main.main(["synth", "--out", str(tmp_path), "--months", "12"]) == EXIT_USAGE


class TestCompare:

    def test_full_suite(self, data_dir, tmp_path):
        out = tmp_path / "out"
        assert run(data_dir, out, "compare", "--hybrid-epochs", "5") == EXIT_OK
        rows = read_rows(out / "metrics.csv")
        assert rows[0] == ["model", "rmse"]
        assert sorted(row[0] for row in rows[1:]) == ["arima", "hybrid", "sarima", "sarimax", "svr"]
        scores = [float(row[1]) for row in rows[1:]]
        assert scores == sorted(scores)
        for label, _ in rows[1:]:
            assert len(read_rows(out / f"forecast_{label}.csv")) == 13
            assert (out / f"overlay_{label}.svg").is_file()

    def test_rerun_is_byte_identical(self, data_dir, tmp_path):
        args = ("compare", "--models", "arima,svr", "--workers", "2")
        assert run(data_dir, tmp_path / "first", *args) == EXIT_OK
        assert run(data_dir, tmp_path / "second", *args) == EXIT_OK
        for name in ("metrics.csv", "forecast_arima.csv", "forecast_svr.csv"):
            assert (tmp_path / "first" / name).read_bytes() == (tmp_path / "second" / name).read_bytes(), name


class TestEvaluate:

    def test_single_model(self, data_dir, tmp_path):
        out = tmp_path / "out"
        assert run(data_dir, out, "evaluate", "--model", "arima", "--no-refit") == EXIT_OK
        assert [row[0] for row in read_rows(out / "metrics.csv")] == ["model", "arima"]
        assert "refit = false" in (out / "run_config.txt").read_text()

    def test_split_too_large(self, data_dir, tmp_path, capsys):
        assert run(data_dir, tmp_path / "out", "evaluate", "--n-test", "168") == EXIT_DATA
        assert "error: SplitTooLarge: n_test=168" in capsys.readouterr().err

    def test_missing_input(self, tmp_path, capsys):
        assert run(tmp_path / "nowhere", tmp_path / "out", "evaluate") == EXIT_DATA
        assert "not found" in capsys.readouterr().err


class TestUsage:

    def test_unknown_flag(self, data_dir, tmp_path):
        assert run(data_dir, tmp_path, "compare", "--colour", "red") == EXIT_USAGE

    def test_unknown_model(self, data_dir, tmp_path, capsys):
        assert run(data_dir, tmp_path, "evaluate", "--model", "lstm") == EXIT_USAGE
        assert "lstm" in capsys.readouterr().err

    def test_missing_command(self):
        assert main.main([]) == EXIT_USAGE

    def test_help(self, capsys):
        assert main.main(["compare", "--help"]) == EXIT_OK
        assert "--models" in capsys.readouterr().out

    def test_config_file(self, data_dir, tmp_path):
        config = tmp_path / "run.conf"
        config.write_text(f"data_dir = {data_dir}\nout = {tmp_path / 'out'}\nmodel = svr\n")
        assert main.main(["evaluate", "--config", str(config)]) == EXIT_OK
        assert (tmp_path / "out" / "forecast_svr.csv").is_file()


class TestFitAndForecast:

    def test_arima_horizon(self, data_dir, tmp_path):
        out = tmp_path / "out"
        assert run(data_dir, out, "fit", "--model", "arima") == EXIT_OK
        assert (out / "model_arima.json").is_file()
        assert run(data_dir, out, "forecast", "--model", "arima", "--horizon", "3") == EXIT_OK
        rows = read_rows(out / "prediction_arima.csv")
        assert [row[0] for row in rows] == ["month", "2024-01", "2024-02", "2024-03"]

    def test_sarimax_needs_future_regressor(self, data_dir, tmp_path, capsys):
        out = tmp_path / "out"
        assert run(data_dir, out, "fit", "--model", "sarimax") == EXIT_OK
        assert run(data_dir, out, "forecast", "--model", "sarimax", "--horizon", "2") == EXIT_DATA
        assert "future regressor" in capsys.readouterr().err
        assert run(data_dir, out, "forecast", "--model", "sarimax", "--horizon", "2", "--exog-next", "60,70") == EXIT_OK
        assert len(read_rows(out / "prediction_sarimax.csv")) == 3

    def test_missing_model_file(self, data_dir, tmp_path):
        assert run(data_dir, tmp_path / "out", "forecast", "--model", "svr") == EXIT_DATA


class TestAnalysis:

    def test_diagnostics(self, data_dir, tmp_path):
        out = tmp_path / "out"
        assert run(data_dir, out, "diagnostics", "--max-lag", "12") == EXIT_OK
        rows = read_rows(out / "diagnostics.csv")
        assert rows[0] == ["series", "lag", "acf", "pacf"]
        assert len(rows) == 1 + 2 * 13
        assert len(read_rows(out / "cross_correlation.csv")) == 14
        assert "levels:" in (out / "adf.txt").read_text()
        assert (out / "scaled.csv").is_file()
        for name in ("dataset.svg", "scaled.svg"):
            assert (out / name).read_text().startswith("<svg")

    def test_components(self, data_dir, tmp_path):
        out = tmp_path / "out"
        assert run(data_dir, out, "components", "--hybrid-epochs", "5") == EXIT_OK
        for name in ("components.csv", "components.svg", "relevance.csv"):
            assert (out / name).is_file()
        assert read_rows(out / "components.csv")[0][:3] == ["month", "actual", "fitted"]
