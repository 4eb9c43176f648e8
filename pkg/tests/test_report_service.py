"""
Tests for the SVG line chart and the run artifacts written by ReportService.
"""
import csv
import math
import xml.etree.ElementTree as ET

import pytest

from schemas.evaluation import ComparisonTable, EvalReport
from schemas.hybrid import HybridComponents
from schemas.series import AdfResult
from services import evaluation_service
from services.report_service import ReportService, line_chart
from tests.conftest import make_series

SVG = "{http://www.w3.org/2000/svg}"


def make_report(label: str, actuals, predictions) -> EvalReport:
    errors = [a - p for a, p in zip(actuals, predictions)]
    return EvalReport(
        model_label=label,
        months=tuple(f"2023-{m:02d}" for m in range(1, len(actuals) + 1)),
        actuals=tuple(actuals),
        predictions=tuple(predictions),
        per_step_error=tuple(errors),
        rmse=math.sqrt(sum(e * e for e in errors) / len(errors)),
        split_fingerprint="abc",
    )


@pytest.fixture
def table():
    good = make_report("svr", [10.0, 20.0, 30.0], [11.0, 19.0, 30.5])
    bad = make_report("arima", [10.0, 20.0, 30.0], [13.0, 16.0, 31.0])
    return ComparisonTable(reports=(good, bad), n_test=3, split_fingerprint="abc")


@pytest.fixture
def reports(tmp_path):
    return ReportService(tmp_path / "out")


def read_rows(path):
    with open(path, newline="") as handle:
        return list(csv.reader(handle))


class TestLineChart:

    def test_one_polyline_per_line(self):
        svg = line_chart("Visitors & search", ["2023-01", "2023-02"], {"a": [1, 2], "b": [2, 1], "c": [0, 0]}, "count")
        root = ET.fromstring(svg)
        polylines = root.findall(f"{SVG}polyline")
        assert len(polylines) == 3
        assert all(len(p.get("points").split()) == 2 for p in polylines)
        labels = [t.text for t in root.findall(f"{SVG}text") if t.get("class") == "axis-label"]
        assert labels == ["month", "count"]
        assert root.find(f"{SVG}title").text == "Visitors & search"

    def test_flat_line(self):
        root = ET.fromstring(line_chart("flat", ["2023-01", "2023-02", "2023-03"], {"a": [5, 5, 5]}))
        ys = {point.split(",")[1] for point in root.find(f"{SVG}polyline").get("points").split()}
        assert len(ys) == 1

    def test_points_stay_inside_canvas(self):
        root = ET.fromstring(line_chart("range", ["a", "b", "c"], {"a": [-50, 0, 1000]}))
        for point in root.find(f"{SVG}polyline").get("points").split():
            x, y = (float(v) for v in point.split(","))
            assert 0.0 <= x <= 800.0 and 0.0 <= y <= 400.0


class TestArtifacts:

    def test_metrics(self, reports, table):
        path = reports.write_metrics(table)
        assert read_rows(path) == [["model", "rmse"], ["svr", "0.87"], ["arima", "2.94"]]

    def test_forecast_csv_reproduces_metric(self, reports, table):
        reports.write_comparison(table)
        for report in table.reports:
            rows = read_rows(reports.output_dir / f"forecast_{report.model_label}.csv")
            assert rows[0] == ["month", "actual", "predicted"]
            actual = [float(r[1]) for r in rows[1:]]
            predicted = [float(r[2]) for r in rows[1:]]
            assert f"{evaluation_service.rmse(actual, predicted):.2f}" == f"{report.rmse:.2f}"
            assert (reports.output_dir / f"overlay_{report.model_label}.svg").is_file()

    def test_overlay_has_actual_and_predicted(self, reports, table):
        path = reports.write_overlay(table.reports[0])
        root = ET.parse(path).getroot()
        assert len(root.findall(f"{SVG}polyline")) == 2

    def test_components(self, reports):
        components = HybridComponents(
            months=("2010-04", "2010-05"),
            actual=(10.0, 12.0),
            fitted=(9.5, 12.5),
            trend=(8.0, 9.0),
            seasonality=(1.0, 2.0),
            ar=(0.5, 1.0),
            regressors={"google_trend": (0.0, 0.5)},
            future=(0.0, 0.0),
            ar_relevance=(0.5, 0.25, 0.125),
            reg_relevance={"google_trend": (0.2, 0.1)},
            base_rate=1.0,
            deltas=(),
            changepoint_times=(),
            fourier_a=(0.1,),
            fourier_b=(0.0,),
        )
        csv_path, svg_path, relevance_path = reports.write_components(components)
        rows = read_rows(csv_path)
        assert rows[0] == ["month", "actual", "fitted", "trend", "seasonality", "ar", "google_trend", "future"]
        assert rows[1][0] == "2010-04"
        assert len(ET.parse(svg_path).getroot().findall(f"{SVG}polyline")) == 4
        relevance = read_rows(relevance_path)
        assert relevance[0] == ["component", "lag", "weight"]
        assert relevance[1] == ["ar", "1", "0.5"]
        assert relevance[-1] == ["google_trend", "2", "0.1"]

    def test_predictions(self, reports):
        path = reports.write_predictions("sarimax", ["2024-01", "2024-02"], [101.5, 99.0])
        assert path.name == "prediction_sarimax.csv"
        assert read_rows(path) == [["month", "predicted"], ["2024-01", "101.5"], ["2024-02", "99.0"]]

    def test_diagnostics(self, reports):
        adf = {"levels": AdfResult(statistic=-1.2, lags=3, n_obs=100, reject_unit_root=False)}
        correlations = {"levels": ([1.0, 0.5], [1.0, 0.5])}
        paths = reports.write_diagnostics(correlations, adf, ("google_trend", [0.9, 0.8]))
        assert [p.name for p in paths] == ["diagnostics.csv", "adf.txt", "cross_correlation.csv"]
        assert read_rows(paths[0])[1] == ["levels", "0", "1.0", "1.0"]
        assert "unit root not rejected" in paths[1].read_text()
        assert read_rows(paths[2])[0] == ["lag", "ccf_google_trend"]

    def test_scaled(self, reports):
        scaled = make_series([0.0, 50.0, 100.0], name="visitors")
        csv_path, svg_path = reports.write_scaled(scaled, make_series([1.0, 2.0, 3.0], name="google_trend"))
        assert read_rows(csv_path)[0] == ["month", "visitors_scaled", "google_trend"]
        assert read_rows(csv_path)[2] == ["2010-02", "50.0", "2.0"]
        root = ET.parse(svg_path).getroot()
        assert len(root.findall(f"{SVG}polyline")) == 2
        assert root.find(f"{SVG}title").text == "visitors vs google_trend"

    def test_scaled_without_regressor(self, reports):
        _, svg_path = reports.write_scaled(make_series([0.0, 100.0], name="visitors"))
        assert len(ET.parse(svg_path).getroot().findall(f"{SVG}polyline")) == 1

    def test_dataset_chart(self, reports):
        path = reports.write_dataset_chart(make_series([5.0, 9.0, 7.0], name="visitors"))
        assert path.name == "dataset.svg"
        root = ET.parse(path).getroot()
        assert root.find(f"{SVG}title").text == "visitors: 2010-01 to 2010-03"
        polylines = root.findall(f"{SVG}polyline")
        assert len(polylines) == 1
        assert len(polylines[0].get("points").split()) == 3
