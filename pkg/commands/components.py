"""
Command decomposing the hybrid model fitted on the training months.
"""
import argparse

from schemas.run import RunConfig
from services import hybrid_service
from services.dataset_service import load_bundle
from services.errors import ForecastError
from services.evaluation_service import build_suite
from services.report_service import ReportService
from services.series_service import split_train_test


def register(subparsers, common: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser(
        "components",
        parents=[common],
        help="Hybrid model decomposition",
        description="""
        Fit the hybrid model on all but the last --n-test months and write
        components.csv (trend, seasonality, AR and regressor contributions),
        components.svg and relevance.csv (weight per lag).
        """,
    )
    parser.add_argument("--hybrid-epochs", dest="hybrid_epochs", type=int, help="Training epochs")
    parser.add_argument("--hybrid-hidden", dest="hybrid_hidden", help="Comma list of hidden widths; empty for linear AR")
    parser.set_defaults(handler=run)


def run(config: RunConfig, args: argparse.Namespace) -> None:
    try:
        bundle = load_bundle(config)
        spec = build_suite(config.model_copy(update={"models": ("hybrid",)}))[0]
        train, _ = split_train_test(bundle.target, config.n_test)
        cut = len(train)
        regressors = [x.slice(0, cut) for x in bundle.exog] if spec.use_exog else []
        model = hybrid_service.fit(spec.config, train, regressors, label=spec.label)
        reports = ReportService(config.out)
        reports.write_components(hybrid_service.components(model, train, regressors))
        reports.write_run_config(config)
    except ForecastError:
        raise
    except Exception as e:
        raise ForecastError(f"Unexpected error: {str(e)}")
