"""
Command comparing the model suite under the rolling one-step protocol.
"""
import argparse

from schemas.run import RunConfig
from services.dataset_service import load_bundle
from services.errors import ForecastError
from services.evaluation_service import build_suite, compare
from services.report_service import ReportService


def register(subparsers, common: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser(
        "compare",
        parents=[common],
        help="Evaluate every suite model on the same split",
        description="""
        Run ARIMA, SARIMA, SARIMAX, SVR and the hybrid model (or --models) on
        the same train/test split and write metrics.csv sorted by RMSE plus a
        forecast CSV and an overlay chart per model.
        """,
    )
    parser.add_argument("--models", help="Comma list of suite labels")
    parser.add_argument("--refit", action=argparse.BooleanOptionalAction, help="Override every model's refit flag")
    parser.add_argument("--svr-c", dest="svr_c", type=float, help="SVR regularisation weight")
    parser.add_argument("--svr-epsilon", dest="svr_epsilon", type=float, help="SVR tube half-width")
    parser.add_argument("--hybrid-epochs", dest="hybrid_epochs", type=int, help="Hybrid training epochs")
    parser.set_defaults(handler=run)


def run(config: RunConfig, args: argparse.Namespace) -> None:
    try:
        bundle = load_bundle(config)
        table = compare(bundle.target, bundle.exog, config.n_test, build_suite(config), workers=config.workers)
        reports = ReportService(config.out)
        reports.write_comparison(table)
        reports.write_run_config(config)
        for report in table.reports:
            print(f"{report.model_label:>8}  RMSE {report.rmse:.2f}")
    except ForecastError:
        raise
    except Exception as e:
        raise ForecastError(f"Unexpected error: {str(e)}")
