"""
Command fitting one suite model on the whole dataset and saving it as JSON.
"""
import argparse

from schemas.run import RunConfig
from services.dataset_service import load_bundle
from services.errors import ForecastError
from services.evaluation_service import build_suite, fit_spec
from services.report_service import ReportService


def register(subparsers, common: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser(
        "fit",
        parents=[common],
        help="Fit one model and save it",
        description="Fit the --model suite entry on every month of the dataset and write model_<label>.json.",
    )
    parser.add_argument("--model", help="Suite label: arima, sarima, sarimax, svr or hybrid")
    parser.set_defaults(handler=run)


def run(config: RunConfig, args: argparse.Namespace) -> None:
    try:
        bundle = load_bundle(config)
        spec = build_suite(config.model_copy(update={"models": (config.model,)}))[0]
        saved = fit_spec(spec, bundle.target, bundle.regressors)
        reports = ReportService(config.out)
        reports.write_model(saved)
        reports.write_run_config(config)
    except ForecastError:
        raise
    except Exception as e:
        raise ForecastError(f"Unexpected error: {str(e)}")
