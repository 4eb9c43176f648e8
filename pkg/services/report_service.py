"""
Report service writing every run artifact under one output directory:
metrics and forecast CSVs, overlay, component and dataset SVG line charts, model JSON
and the echoed run configuration.
"""
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union
from xml.sax.saxutils import escape

from schemas.evaluation import ComparisonTable, EvalReport
from schemas.hybrid import HybridComponents
from schemas.run import RunConfig, SavedModel
from schemas.series import AdfResult, TimeSeries
from services import config_service

logger = logging.getLogger(__name__)

CHART_WIDTH = 800
CHART_HEIGHT = 400
CHART_MARGIN = 60
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")


def _number(value: float) -> str:
    return repr(float(value))


def line_chart(
    title: str,
    months: Sequence[str],
    lines: Dict[str, Sequence[float]],
    y_label: str = "visitors",
) -> str:
    """SVG document with one polyline per entry of ``lines`` plus axes, axis labels and a legend."""
    values = [float(v) for series in lines.values() for v in series]
    low, high = (min(values), max(values)) if values else (0.0, 1.0)
    if high == low:
        high = low + 1.0
    plot_w = CHART_WIDTH - 2 * CHART_MARGIN
    plot_h = CHART_HEIGHT - 2 * CHART_MARGIN
    steps = max(len(months) - 1, 1)

    def x_of(i: int) -> float:
        return CHART_MARGIN + plot_w * i / steps

    def y_of(v: float) -> float:
        return CHART_MARGIN + plot_h * (1.0 - (v - low) / (high - low))

    bottom = CHART_MARGIN + plot_h
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{CHART_WIDTH}" height="{CHART_HEIGHT}" '
        f'viewBox="0 0 {CHART_WIDTH} {CHART_HEIGHT}">',
        f'<title>{escape(title)}</title>',
        f'<text x="{CHART_WIDTH / 2}" y="{CHART_MARGIN / 2}" text-anchor="middle" font-size="16">{escape(title)}</text>',
        f'<line x1="{CHART_MARGIN}" y1="{bottom}" x2="{CHART_MARGIN + plot_w}" y2="{bottom}" stroke="black"/>',
        f'<line x1="{CHART_MARGIN}" y1="{CHART_MARGIN}" x2="{CHART_MARGIN}" y2="{bottom}" stroke="black"/>',
        f'<text class="axis-label" x="{CHART_MARGIN + plot_w / 2}" y="{CHART_HEIGHT - 15}" '
        f'text-anchor="middle" font-size="12">month</text>',
        f'<text class="axis-label" x="15" y="{CHART_MARGIN + plot_h / 2}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 15 {CHART_MARGIN + plot_h / 2})">{escape(y_label)}</text>',
    ]
    if months:
        parts.append(f'<text x="{CHART_MARGIN}" y="{bottom + 18}" font-size="10">{escape(months[0])}</text>')
        parts.append(
            f'<text x="{CHART_MARGIN + plot_w}" y="{bottom + 18}" text-anchor="end" font-size="10">{escape(months[-1])}</text>'
        )
    parts.append(f'<text x="{CHART_MARGIN - 5}" y="{bottom}" text-anchor="end" font-size="10">{low:.6g}</text>')
    parts.append(f'<text x="{CHART_MARGIN - 5}" y="{CHART_MARGIN}" text-anchor="end" font-size="10">{high:.6g}</text>')

    for index, (name, series) in enumerate(lines.items()):
        color = PALETTE[index % len(PALETTE)]
        points = " ".join(f"{x_of(i):.2f},{y_of(float(v)):.2f}" for i, v in enumerate(series))
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{points}"/>')
        legend_y = CHART_MARGIN + 14 * index
        parts.append(
            f'<text x="{CHART_MARGIN + plot_w - 4}" y="{legend_y}" text-anchor="end" font-size="11" fill="{color}">'
            f'{escape(name)}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


class ReportService:
    """Writes run artifacts below ``output_dir``."""

    def __init__(self, output_dir: Union[str, Path]):
        self.output_dir = Path(output_dir)
        self._ensure_output_dir()

    def _ensure_output_dir(self):
        self.output_dir.mkdir(parents=True, exist_ok=True)

    def _write(self, name: str, content: str, description: str) -> Path:
        path = self.output_dir / name
        with open(path, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(content)
        logger.info("Wrote %s", path)
        print(f"✓ {description}: {path}")
        return path

    def write_run_config(self, config: RunConfig) -> Path:
        return self._write("run_config.txt", config_service.render(config), "Resolved config")

    def write_metrics(self, table: ComparisonTable) -> Path:
        rows = ["model,rmse"] + [f"{r.model_label},{r.rmse:.2f}" for r in table.reports]
        return self._write("metrics.csv", "\n".join(rows) + "\n", "Metrics")

    def write_forecast(self, report: EvalReport) -> Path:
        rows = ["month,actual,predicted"] + [
            f"{month},{_number(actual)},{_number(predicted)}"
            for month, actual, predicted in zip(report.months, report.actuals, report.predictions)
        ]
        return self._write(f"forecast_{report.model_label}.csv", "\n".join(rows) + "\n", f"Forecast {report.model_label}")

    def write_overlay(self, report: EvalReport) -> Path:
        svg = line_chart(
            f"{report.model_label}: actual vs predicted (RMSE {report.rmse:.2f})",
            report.months,
            {"actual": report.actuals, "predicted": report.predictions},
        )
        return self._write(f"overlay_{report.model_label}.svg", svg, f"Overlay {report.model_label}")

    def write_evaluation(self, report: EvalReport) -> List[Path]:
        return [self.write_forecast(report), self.write_overlay(report)]

    def write_comparison(self, table: ComparisonTable) -> List[Path]:
        paths = [self.write_metrics(table)]
        for report in table.reports:
            paths.extend(self.write_evaluation(report))
        return paths

    def write_components(self, components: HybridComponents) -> List[Path]:
        """components.csv, components.svg and relevance.csv."""
        reg_names = list(components.regressors)
        header = ["month", "actual", "fitted", "trend", "seasonality", "ar"] + reg_names + ["future"]
        rows = [",".join(header)]
        for i, month in enumerate(components.months):
            cells = [
                month,
                _number(components.actual[i]),
                _number(components.fitted[i]),
                _number(components.trend[i]),
                _number(components.seasonality[i]),
                _number(components.ar[i]),
            ]
            cells += [_number(components.regressors[name][i]) for name in reg_names]
            cells.append(_number(components.future[i]))
            rows.append(",".join(cells))
        csv_path = self._write("components.csv", "\n".join(rows) + "\n", "Components")

        lines = {"trend": components.trend, "seasonality": components.seasonality}
        if components.ar_relevance:
            lines["ar"] = components.ar
        for name in reg_names:
            lines[name] = components.regressors[name]
        svg_path = self._write("components.svg", line_chart("Hybrid components", components.months, lines), "Components chart")

        relevance = ["component,lag,weight"]
        relevance += [f"ar,{lag},{_number(w)}" for lag, w in enumerate(components.ar_relevance, start=1)]
        for name, weights in components.reg_relevance.items():
            relevance += [f"{name},{lag},{_number(w)}" for lag, w in enumerate(weights, start=1)]
        relevance_path = self._write("relevance.csv", "\n".join(relevance) + "\n", "Lag relevance")
        return [csv_path, svg_path, relevance_path]

    def write_model(self, saved: SavedModel) -> Path:
        return self._write(f"model_{saved.label}.json", saved.model_dump_json(indent=2) + "\n", f"Model {saved.label}")

    def write_predictions(self, label: str, months: Sequence[str], predictions: Sequence[float]) -> Path:
        rows = ["month,predicted"] + [f"{m},{_number(v)}" for m, v in zip(months, predictions)]
        return self._write(f"prediction_{label}.csv", "\n".join(rows) + "\n", f"Prediction {label}")

    def write_diagnostics(
        self,
        correlations: Dict[str, Tuple[Sequence[float], Sequence[float]]],
        adf: Dict[str, AdfResult],
        cross: Optional[Tuple[str, Sequence[float]]] = None,
    ) -> List[Path]:
        """diagnostics.csv (series,lag,acf,pacf), adf.txt and optionally cross_correlation.csv."""
        rows = ["series,lag,acf,pacf"]
        for name, (acf_values, pacf_values) in correlations.items():
            rows += [
                f"{name},{lag},{_number(a)},{_number(p)}"
                for lag, (a, p) in enumerate(zip(acf_values, pacf_values))
            ]
        paths = [self._write("diagnostics.csv", "\n".join(rows) + "\n", "Correlograms")]

        lines = []
        for name, result in adf.items():
            verdict = "stationary (unit root rejected)" if result.reject_unit_root else "unit root not rejected"
            lines.append(
                f"{name}: statistic={result.statistic:.4f} lags={result.lags} n_obs={result.n_obs} "
                f"critical_5pct={result.critical_value} -> {verdict}"
            )
        paths.append(self._write("adf.txt", "\n".join(lines) + "\n", "Unit-root tests"))

        if cross is not None:
            regressor, values = cross
            rows = [f"lag,ccf_{regressor}"] + [f"{lag},{_number(v)}" for lag, v in enumerate(values)]
            paths.append(self._write("cross_correlation.csv", "\n".join(rows) + "\n", "Cross-correlation"))
        return paths

    def write_dataset_chart(self, target: TimeSeries) -> Path:
        """
        dataset.svg: the whole target series.

        Args:
            target: Series as read from disk

        Returns:
            The written path
        """
        months = [str(m) for m in target.months()]
        svg = line_chart(f"{target.name}: {months[0]} to {months[-1]}", months, {target.name: target.values})
        return self._write("dataset.svg", svg, "Dataset chart")

    def write_scaled(self, scaled: TimeSeries, regressor: Optional[TimeSeries] = None) -> List[Path]:
        """scaled.csv and scaled.svg: month, target mapped onto [0, 100], regressor as given."""
        header = f"month,{scaled.name}_scaled" + (f",{regressor.name}" if regressor is not None else "")
        rows = [header]
        months = [str(m) for m in scaled.months()]
        for i, month in enumerate(months):
            cells = [month, _number(scaled.values[i])]
            if regressor is not None:
                cells.append(_number(regressor.values[i]))
            rows.append(",".join(cells))
        csv_path = self._write("scaled.csv", "\n".join(rows) + "\n", "Scaled series")

        lines = {f"{scaled.name} (scaled)": scaled.values}
        if regressor is not None:
            lines[regressor.name] = regressor.values
        title = f"{scaled.name} vs {regressor.name}" if regressor is not None else f"{scaled.name} (scaled)"
        svg_path = self._write("scaled.svg", line_chart(title, months, lines, y_label="index"), "Scaled chart")
        return [csv_path, svg_path]
