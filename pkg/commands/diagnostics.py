"""
Command reporting correlograms, unit-root tests and the target/regressor
cross-correlation used to choose model orders.
"""
import argparse

from schemas.run import RunConfig
from services import series_service
from services.dataset_service import load_bundle
from services.errors import ForecastError
from services.report_service import ReportService


def register(subparsers, common: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser(
        "diagnostics",
        parents=[common],
        help="ACF, PACF, ADF and cross-correlation",
        description="""
        Write diagnostics.csv (acf and pacf up to --max-lag for the levels and
        the first difference), adf.txt, cross_correlation.csv against the
        regressor, dataset.svg with the full target, and scaled.csv plus
        scaled.svg with the target mapped onto [0, 100] next to the regressor.
        """,
    )
    parser.add_argument("--max-lag", dest="max_lag", type=int, help="Largest lag reported")
    parser.set_defaults(handler=run)


def run(config: RunConfig, args: argparse.Namespace) -> None:
    try:
        bundle = load_bundle(config)
        levels = bundle.target
        first_difference = series_service.difference(levels, 1)
        series = {"levels": levels, "first_difference": first_difference}
        correlations = {
            name: (series_service.acf(s, config.max_lag), series_service.pacf(s, config.max_lag))
            for name, s in series.items()
        }
        adf = {name: series_service.adf_statistic(s) for name, s in series.items()}

        regressor = bundle.exog[0] if bundle.exog else None
        cross = None
        if regressor is not None:
            cross = (regressor.name, series_service.cross_correlation(levels, regressor, config.max_lag))

        reports = ReportService(config.out)
        reports.write_diagnostics(correlations, adf, cross)
        reports.write_dataset_chart(levels)
        reports.write_scaled(series_service.scale_to_range(levels, 0.0, 100.0), regressor)
        reports.write_run_config(config)
    except ForecastError:
        raise
    except Exception as e:
        raise ForecastError(f"Unexpected error: {str(e)}")
