"""
Command writing a seeded synthetic visitor series and its search index.
"""
import argparse
from pathlib import Path

from schemas.run import RunConfig
from services.dataset_service import synth_dataset, write_csv
from services.errors import ForecastError
from services.report_service import ReportService


def register(subparsers, common: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser(
        "synth",
        parents=[common],
        help="Generate a seeded synthetic dataset",
        description="""
        Write visitors.csv and google_trend.csv to --out: a monthly visitor series
        with a steepening trend, a July/August peak and one spike month, plus a
        search-interest index in [0, 100] that tracks it.
        """,
    )
    parser.add_argument("--months", type=int, help="Series length in months (at least 36)")
    parser.set_defaults(handler=run)


def run(config: RunConfig, args: argparse.Namespace) -> None:
    """Generate the bundle and write one CSV per series plus the resolved config."""
    try:
        bundle = synth_dataset(config.seed, config.months)
        out = Path(config.out)
        path = write_csv(bundle.target, out / config.target)
        print(f"✓ Target series ({len(bundle.target)} months): {path}")
        for name, series in bundle.regressors.items():
            filename = config.regressor if config.regressor else f"{name}.csv"
            path = write_csv(series, out / filename)
            print(f"✓ Regressor {name}: {path}")
        ReportService(out).write_run_config(config)
    except ForecastError:
        raise
    except Exception as e:
        raise ForecastError(f"Unexpected error: {str(e)}")
