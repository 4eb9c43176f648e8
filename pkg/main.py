"""
Command-line entry point for the monthly visitor forecasting toolkit.

Sub-commands: synth, fit, forecast, evaluate, compare, components, diagnostics.
Settings come from flags, an optional --config file of ``key = value`` lines,
FORECAST_* environment variables and built-in defaults, in that order.

Exit codes: 0 success, 1 usage error, 2 data error.
"""
import argparse
import logging
import os
import sys
from typing import List, Optional

from dotenv import load_dotenv

from commands import compare, components, diagnostics, evaluate, fit, forecast, synth
from schemas.run import RunConfig
from services import config_service
from services.errors import EXIT_OK, ForecastError, UsageError

# Load environment variables from .env file
load_dotenv()

LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

COMMANDS = (synth, fit, forecast, evaluate, compare, components, diagnostics)


class ArgumentParser(argparse.ArgumentParser):
    """Reports bad flags as UsageError (exit 1) instead of exiting with 2."""

    def error(self, message: str):
        raise UsageError(f"{self.prog}: {message}")


def _common_arguments() -> argparse.ArgumentParser:
    common = ArgumentParser(add_help=False)
    common.add_argument("--config", help="Flat key = value config file")
    common.add_argument("--seed", type=int, help="Random seed (default FORECAST_SEED or 7)")
    common.add_argument("--n-test", dest="n_test", type=int, help="Test months at the end of the series")
    common.add_argument("--out", help="Output directory")
    common.add_argument("--data-dir", dest="data_dir", help="Directory holding the input CSV files")
    common.add_argument("--target", help="Target CSV name inside the data directory")
    common.add_argument("--regressor", help="Regressor CSV name inside the data directory ('none' to skip)")
    common.add_argument("--workers", type=int, help="Concurrent model evaluations")
    return common


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(
        prog="forecast",
        description="Monthly visitor forecasting with (S)ARIMA(X), SVR and a hybrid additive model.",
    )
    subparsers = parser.add_subparsers(dest="command", metavar="command")
    subparsers.required = True
    common = _common_arguments()
    for command in COMMANDS:
        command.register(subparsers, common)
    return parser


def configure_logging(level: str = LOG_LEVEL) -> None:
    logging.basicConfig(level=getattr(logging, level.upper(), logging.INFO), format=LOG_FORMAT, stream=sys.stderr)


def main(argv: Optional[List[str]] = None) -> int:
    configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        flags = {key: value for key, value in vars(args).items() if key in RunConfig.model_fields}
        config = config_service.resolve(flags, args.config)
        args.handler(config, args)
    except ForecastError as e:
        print(f"error: {e.detail}", file=sys.stderr)
        return e.exit_code
    except SystemExit as e:
        # --help
        return e.code if isinstance(e.code, int) else EXIT_OK
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
