"""
Error hierarchy for the forecasting services.

Every failure carries a human-readable ``detail`` and the process exit code the
command line reports for it: 1 for usage problems, 2 for data problems.
"""
from typing import Optional

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class ForecastError(Exception):
    """Base class for all expected failures."""

    exit_code: int = EXIT_DATA

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class UsageError(ForecastError):
    """Invalid flags, config keys or model orders."""

    exit_code = EXIT_USAGE


class DataError(ForecastError):
    """The data cannot support the requested operation."""

    exit_code = EXIT_DATA


class SeriesTooShort(DataError):
    pass


class PivotMismatch(DataError):
    pass


class LagTooLarge(DataError):
    pass


class ConstantSeries(DataError):
    pass


class SplitTooLarge(DataError):
    pass


class SingularDesign(DataError):
    pass


class NonConvergence(DataError):
    pass


class HistoryTooShort(DataError):
    pass


class MissingExogenous(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class DegenerateFrame(DataError):
    pass


class SeasonalityDisabled(DataError):
    pass


class MissingComponentInput(DataError):
    pass


class MisalignedRegressor(DataError):
    pass


class LengthMismatch(DataError):
    pass


class EmptyInput(DataError):
    pass


class InputNotFound(DataError):
    def __init__(self, path: str):
        super().__init__(f"Input file not found: {path}")
        self.path = path


class ParseError(DataError):
    """Malformed CSV row; ``line`` is 1-based and counts the header."""

    def __init__(self, line: int, reason: str, path: Optional[str] = None):
        where = f"{path}:{line}" if path else f"line {line}"
        super().__init__(f"Parse error at {where}: {reason}")
        self.line = line


class GapError(DataError):
    def __init__(self, missing_month: str, path: Optional[str] = None):
        source = f" in {path}" if path else ""
        super().__init__(f"Missing month {missing_month}{source}")
        self.missing_month = missing_month


class NonMonotonic(DataError):
    def __init__(self, month: str, path: Optional[str] = None):
        source = f" in {path}" if path else ""
        super().__init__(f"Month {month} is out of ascending order{source}")
        self.month = month
