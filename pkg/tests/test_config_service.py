"""
Tests for run configuration resolution and the flat config file format.
"""
import pytest

from schemas.arima import ArimaOrder, SeasonalOrder
from schemas.run import SUITE_LABELS, RunConfig
from services import config_service
from services.errors import InputNotFound, UsageError


class TestResolve:

    def test_defaults(self):
        config = config_service.resolve()
        assert config.seed == 7
        assert config.n_test == 12
        assert config.models == SUITE_LABELS
        assert config.refit is None
        assert config.arima_order == ArimaOrder(p=3, d=1, q=0)
        assert config.seasonal_order == SeasonalOrder(P=1, D=1, Q=0, M=12)

    def test_environment(self, monkeypatch):
        monkeypatch.setenv("FORECAST_SEED", "11")
        monkeypatch.setenv("FORECAST_OUTPUT_DIR", "/tmp/runs")
        config = config_service.resolve()
        assert config.seed == 11
        assert config.out == "/tmp/runs"

    def test_file_beats_environment(self, monkeypatch, tmp_path):
        monkeypatch.setenv("FORECAST_SEED", "11")
        path = tmp_path / "run.conf"
        path.write_text("# experiment\nseed = 5\nn-test = 6\n")
        config = config_service.resolve(config_file=path)
        assert config.seed == 5
        assert config.n_test == 6

    def test_flags_beat_file(self, tmp_path):
        path = tmp_path / "run.conf"
        path.write_text("seed = 5\nworkers = 2\n")
        config = config_service.resolve({"seed": 9, "workers": None}, path)
        assert config.seed == 9
        assert config.workers == 2

    def test_comma_lists_and_orders(self):
        config = config_service.resolve(
            {"models": "svr, arima", "hybrid_hidden": "8", "arima_order": "1,1,1", "seasonal_order": "0,1,1,12"}
        )
        assert config.models == ("svr", "arima")
        assert config.hybrid_hidden == (8,)
        assert config.arima_order == ArimaOrder(p=1, d=1, q=1)
        assert config.seasonal_order == SeasonalOrder(P=0, D=1, Q=1, M=12)

    def test_regressor_none(self):
        assert config_service.resolve({"regressor": "none"}).regressor_path is None

    def test_bad_value_names_key(self):
        with pytest.raises(UsageError, match="n_test"):
            config_service.resolve({"n_test": "0"})

    def test_unknown_model_label(self):
        with pytest.raises(UsageError, match="bogus"):
            config_service.resolve({"models": "arima,bogus"})

    def test_unknown_flag_key(self):
        with pytest.raises(UsageError):
            config_service.resolve({"colour": "red"})


class TestConfigFile:

    def test_unknown_key(self, tmp_path):
        path = tmp_path / "run.conf"
        path.write_text("colour = red\n")
        with pytest.raises(UsageError, match="colour"):
            config_service.read_config_file(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(InputNotFound):
            config_service.read_config_file(tmp_path / "absent.conf")

    def test_render_is_sorted(self):
        keys = [line.split(" = ")[0] for line in config_service.render(RunConfig()).splitlines()]
        assert keys == sorted(keys)
        assert set(keys) == set(RunConfig.model_fields)

    def test_render_reads_back(self, tmp_path):
        config = RunConfig(
            seed=3,
            models=("svr", "arima"),
            refit=False,
            regressor=None,
            hybrid_hidden=(8,),
            exog_next=(1.5, 2.0),
            seasonal_order=SeasonalOrder(P=0, D=1, Q=1, M=12),
        )
        path = tmp_path / "run_config.txt"
        path.write_text(config_service.render(config))
        assert RunConfig(**config_service.read_config_file(path)) == config
