"""
Tests for CSV ingestion, emission, dataset bundles and the synthetic generator.
"""
import numpy as np
import pytest

from schemas.run import RunConfig, SynthParams
from schemas.series import MonthStamp
from services import dataset_service
from services.errors import GapError, InputNotFound, MisalignedRegressor, NonMonotonic, ParseError, UsageError
from tests.conftest import make_series


def write_text(path, text: str, encoding: str = "utf-8"):
    path.write_bytes(text.encode(encoding))
    return path


class TestIngest:

    def test_two_rows(self, tmp_path):
        path = write_text(tmp_path / "visitors.csv", "month,value\n2010-01,5\n2010-02,7\n")
        series = dataset_service.ingest_csv(path)
        assert series.values == (5.0, 7.0)
        assert series.start == MonthStamp(year=2010, month=1)
        assert series.name == "visitors"

    def test_explicit_name(self, tmp_path):
        path = write_text(tmp_path / "data.csv", "month,value\n2010-01,5\n")
        assert dataset_service.ingest_csv(path, name="arrivals").name == "arrivals"

    def test_gap_names_missing_month(self, tmp_path):
        path = write_text(tmp_path / "gap.csv", "month,value\n2010-01,5\n2010-03,7\n")
        with pytest.raises(GapError) as excinfo:
            dataset_service.ingest_csv(path)
        assert excinfo.value.missing_month == "2010-02"

    def test_below_one_reads_as_zero(self, tmp_path):
        path = write_text(tmp_path / "trend.csv", "month,value\n2010-01,<1\n2010-02,3\n")
        assert dataset_service.ingest_csv(path).values == (0.0, 3.0)

    def test_crlf_and_bom(self, tmp_path):
        path = write_text(tmp_path / "windows.csv", "month,value\r\n2010-01,5\r\n2010-02,7\r\n", encoding="utf-8-sig")
        assert dataset_service.ingest_csv(path).values == (5.0, 7.0)

    def test_trailing_blank_line(self, tmp_path):
        path = write_text(tmp_path / "blank.csv", "month,value\n2010-01,5\n\n")
        assert len(dataset_service.ingest_csv(path)) == 1

    @pytest.mark.parametrize("rows", ["2010-02,5\n2010-01,7\n", "2010-01,5\n2010-01,7\n"])
    def test_out_of_order(self, tmp_path, rows):
        path = write_text(tmp_path / "order.csv", "month,value\n" + rows)
        with pytest.raises(NonMonotonic):
            dataset_service.ingest_csv(path)

    def test_bad_header(self, tmp_path):
        path = write_text(tmp_path / "header.csv", "date,visitors\n2010-01,5\n")
        with pytest.raises(ParseError) as excinfo:
            dataset_service.ingest_csv(path)
        assert excinfo.value.line == 1

    @pytest.mark.parametrize("row", ["2010-02,abc", "2010-02,-4", "2010-02,nan", "2010-13,4", "2010-02,4,1"])
    def test_bad_row(self, tmp_path, row):
        path = write_text(tmp_path / "row.csv", "month,value\n2010-01,5\n" + row + "\n")
        with pytest.raises(ParseError) as excinfo:
            dataset_service.ingest_csv(path)
        assert excinfo.value.line == 3

    def test_header_only(self, tmp_path):
        path = write_text(tmp_path / "empty.csv", "month,value\n")
        with pytest.raises(ParseError):
            dataset_service.ingest_csv(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(InputNotFound):
            dataset_service.ingest_csv(tmp_path / "absent.csv")


class TestWrite:

    def test_integers_have_no_decimal_point(self, tmp_path):
        path = dataset_service.write_csv(make_series([5.0, 7.0], name="visitors"), tmp_path / "out.csv")
        assert path.read_text() == "month,value\n2010-01,5\n2010-02,7\n"

    def test_reads_back_unchanged(self, tmp_path):
        series = make_series([1.0, 2.5, 1e-3, 123456.0], name="mixed")
        path = dataset_service.write_csv(series, tmp_path / "nested" / "mixed.csv")
        assert dataset_service.ingest_csv(path) == series

    def test_random_series_read_back_unchanged(self, tmp_path):
        rng = np.random.default_rng(99)
        for case in range(100):
            start = MonthStamp(year=int(rng.integers(1990, 2031)), month=int(rng.integers(1, 13)))
            n = int(rng.integers(1, 61))
            if case % 2:
                values = rng.uniform(0.0, 1e5, size=n)
            else:
                values = rng.integers(0, 10 ** 7, size=n).astype(float)
            series = make_series(values, name=f"series_{case}", start=start)
            path = dataset_service.write_csv(series, tmp_path / f"series_{case}.csv")
            assert dataset_service.ingest_csv(path) == series, f"case {case}"


class TestSynth:

    def test_summer_peak_every_year(self):
        target = dataset_service.synth_dataset(7).target.array
        for year in target.reshape(-1, 12):
            assert set(np.argsort(year)[-2:]) == {6, 7}

    def test_index_tracks_target(self):
        bundle = dataset_service.synth_dataset(7)
        index = bundle.regressors["google_trend"].array
        assert np.corrcoef(bundle.target.array, index)[0, 1] > 0.8
        assert index.min() >= 0.0 and index.max() <= 100.0
        np.testing.assert_array_equal(index, np.round(index))

    def test_seeded(self):
        assert dataset_service.synth_dataset(3) == dataset_service.synth_dataset(3)
        assert dataset_service.synth_dataset(3) != dataset_service.synth_dataset(4)

    def test_length_and_start(self):
        bundle = dataset_service.synth_dataset(7, n_months=48, params=SynthParams(start="2015-01"))
        assert len(bundle.target) == 48
        assert str(bundle.target.start) == "2015-01"
        assert bundle.regressors["google_trend"].aligned_with(bundle.target)

    def test_too_few_months(self):
        with pytest.raises(UsageError):
            dataset_service.synth_dataset(7, n_months=35)

    def test_written_files_round_trip(self, tmp_path):
        bundle = dataset_service.synth_dataset(7)
        path = dataset_service.write_csv(bundle.target, tmp_path / "visitors.csv")
        assert dataset_service.ingest_csv(path) == bundle.target

    def test_target_is_components_plus_noise(self):
        params = SynthParams()
        target = dataset_service.synth_dataset(7).target.array
        noise = params.noise * np.random.default_rng(7).standard_normal(168)
        structural = sum(dataset_service.synth_components(168, params).values())
        np.testing.assert_allclose(target - noise, structural, atol=0.5)

    def test_noise_free_shape(self):
        params = SynthParams(noise=0.0)
        target = dataset_service.synth_dataset(7, n_months=48, params=params).target.array
        t = np.arange(48)
        profile = np.array(params.seasonal_profile)
        expected = 20000.0 + 60.0 * t + 120.0 * np.maximum(t - 29, 0) + profile[t % 12]
        np.testing.assert_array_equal(target, expected)

    def test_spike_scales_one_month(self):
        plain = dataset_service.synth_dataset(7, n_months=48, params=SynthParams(noise=0.0)).target.array
        params = SynthParams(noise=0.0, spike_month="2012-07")
        spiked = dataset_service.synth_dataset(7, n_months=48, params=params).target.array
        assert spiked[30] == round(1.4 * plain[30])
        np.testing.assert_array_equal(np.delete(spiked, 30), np.delete(plain, 30))
        assert dataset_service.synth_components(48, params)["spike"].nonzero()[0].tolist() == [30]


class TestBundle:

    def test_target_and_regressor(self, tmp_path):
        write_text(tmp_path / "visitors.csv", "month,value\n2010-01,5\n2010-02,7\n")
        write_text(tmp_path / "google_trend.csv", "month,value\n2010-01,<1\n2010-02,40\n")
        bundle = dataset_service.load_bundle(RunConfig(data_dir=str(tmp_path)))
        assert list(bundle.regressors) == ["google_trend"]
        assert bundle.regressors["google_trend"].values == (0.0, 40.0)

    def test_without_regressor(self, tmp_path):
        write_text(tmp_path / "visitors.csv", "month,value\n2010-01,5\n2010-02,7\n")
        bundle = dataset_service.load_bundle(RunConfig(data_dir=str(tmp_path), regressor="none"))
        assert bundle.regressors == {}

    def test_misaligned_regressor(self, tmp_path):
        write_text(tmp_path / "visitors.csv", "month,value\n2010-01,5\n2010-02,7\n")
        write_text(tmp_path / "google_trend.csv", "month,value\n2010-02,40\n2010-03,41\n")
        with pytest.raises(MisalignedRegressor):
            dataset_service.load_bundle(RunConfig(data_dir=str(tmp_path)))
