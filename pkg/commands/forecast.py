"""
Command predicting the months after the end of the data from a saved model.
"""
import argparse
from pathlib import Path

from pydantic import ValidationError

from schemas.run import RunConfig, SavedModel
from services.dataset_service import load_bundle
from services.errors import DataError, ForecastError, InputNotFound
from services.evaluation_service import forecast_saved
from services.report_service import ReportService


def register(subparsers, common: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser(
        "forecast",
        parents=[common],
        help="Forecast beyond the data with a saved model",
        description="""
        Load model_<label>.json (or --model-file) and predict --horizon months
        after the last observation. ARIMA-family models forecast recursively;
        a model with regressors needs their future values via --exog-next,
        month by month. SVR and hybrid models without lagged regressors feed
        their predictions back as lags.
        """,
    )
    parser.add_argument("--model", help="Suite label of the saved model")
    parser.add_argument("--model-file", dest="model_file", help="Path of the saved model JSON")
    parser.add_argument("--horizon", type=int, help="Months to forecast")
    parser.add_argument("--exog-next", dest="exog_next", help="Comma list of future regressor values")
    parser.set_defaults(handler=run)


def load_saved(path: Path) -> SavedModel:
    if not path.is_file():
        raise InputNotFound(str(path))
    try:
        return SavedModel.model_validate_json(path.read_text(encoding="utf-8"))
    except ValidationError as e:
        raise DataError(f"Invalid model file {path}: {e.errors()[0]['msg']}")


def run(config: RunConfig, args: argparse.Namespace) -> None:
    try:
        path = Path(config.model_file) if config.model_file else Path(config.out) / f"model_{config.model}.json"
        saved = load_saved(path)
        bundle = load_bundle(config)
        months, predictions = forecast_saved(
            saved, bundle.target, bundle.regressors, config.horizon, config.exog_next
        )
        reports = ReportService(config.out)
        reports.write_predictions(saved.label, months, predictions)
        reports.write_run_config(config)
    except ForecastError:
        raise
    except Exception as e:
        raise ForecastError(f"Unexpected error: {str(e)}")
