"""
Command running the rolling one-step evaluation for a single model.
"""
import argparse

from schemas.evaluation import ComparisonTable
from schemas.run import RunConfig
from services.dataset_service import load_bundle
from services.errors import ForecastError
from services.evaluation_service import build_suite, evaluate
from services.report_service import ReportService


def register(subparsers, common: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser(
        "evaluate",
        parents=[common],
        help="Rolling one-step evaluation of one model",
        description="""
        Predict each of the last --n-test months from the data before it and
        write metrics.csv, forecast_<model>.csv and overlay_<model>.svg.
        """,
    )
    parser.add_argument("--model", help="Suite label: arima, sarima, sarimax, svr or hybrid")
    parser.add_argument("--refit", action=argparse.BooleanOptionalAction, help="Re-estimate before every test month")
    parser.set_defaults(handler=run)


def run(config: RunConfig, args: argparse.Namespace) -> None:
    try:
        bundle = load_bundle(config)
        spec = build_suite(config.model_copy(update={"models": (config.model,)}))[0]
        report = evaluate(spec, bundle.target, bundle.exog, config.n_test)
        reports = ReportService(config.out)
        reports.write_comparison(
            ComparisonTable(reports=(report,), n_test=config.n_test, split_fingerprint=report.split_fingerprint)
        )
        reports.write_run_config(config)
        print(f"{report.model_label}: RMSE {report.rmse:.2f} over {config.n_test} months")
    except ForecastError:
        raise
    except Exception as e:
        raise ForecastError(f"Unexpected error: {str(e)}")
