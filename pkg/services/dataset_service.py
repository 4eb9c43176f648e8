"""
Monthly CSV ingestion and emission, dataset bundles and the seeded
synthetic visitor/search-interest generator.

Input format: UTF-8, header ``month,value``, one ``YYYY-MM,<number>`` row per
consecutive month, LF or CRLF line endings. A Google Trends ``<1`` cell reads
as 0.0. Gaps and out-of-order months are rejected, never imputed.
"""
import logging
import math
import re
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np
import pandas as pd

from schemas.run import DatasetBundle, RunConfig, SynthParams
from schemas.series import MONTH_FORMAT, MonthStamp, TimeSeries
from services.errors import GapError, InputNotFound, MisalignedRegressor, NonMonotonic, ParseError, UsageError
from services.series_service import scale_to_range

logger = logging.getLogger(__name__)

HEADER = ("month", "value")
BELOW_ONE = "<1"
MIN_SYNTH_MONTHS = 36
_TOKENIZER_LINE = re.compile(r"line (\d+)")

PathLike = Union[str, Path]


def _parse_value(text: str, line: int, path: str) -> float:
    text = text.strip()
    if text == BELOW_ONE:
        return 0.0
    try:
        value = float(text)
    except ValueError:
        raise ParseError(line, f"value {text!r} is not a number", path)
    if not math.isfinite(value) or value < 0.0:
        raise ParseError(line, f"value {text!r} must be a finite nonnegative number", path)
    return value


def _read_frame(path: Path) -> pd.DataFrame:
    """Every physical line as a row of strings; row ``i`` is line ``i + 1``."""
    source = str(path)
    try:
        frame = pd.read_csv(
            path,
            header=None,
            dtype=str,
            keep_default_na=False,
            skip_blank_lines=False,
            encoding="utf-8-sig",
        )
    except pd.errors.EmptyDataError:
        raise ParseError(1, "header must be 'month,value'", source)
    except pd.errors.ParserError as e:
        match = _TOKENIZER_LINE.search(str(e))
        raise ParseError(int(match.group(1)) if match else 0, f"malformed row: {str(e).strip()}", source)
    return frame.fillna("")


def ingest_csv(path: PathLike, name: Optional[str] = None) -> TimeSeries:
    """
    Read a strictly consecutive monthly series.

    Args:
        path: CSV file with the header ``month,value``
        name: Series name; defaults to the file stem

    Returns:
        TimeSeries starting at the first data row

    Raises:
        InputNotFound: If the file does not exist
        ParseError: On a bad header, field count, month or value (1-based line)
        NonMonotonic: If a month repeats or goes backwards
        GapError: If a month is missing
    """
    path = Path(path)
    if not path.is_file():
        raise InputNotFound(str(path))
    source = str(path)
    frame = _read_frame(path)

    header = tuple(cell.strip().lower() for cell in frame.iloc[0])
    if header != HEADER:
        raise ParseError(1, "header must be 'month,value'", source)

    body = frame.iloc[1:]
    raw_months = body[0].str.strip()
    stamps = pd.to_datetime(raw_months, format=MONTH_FORMAT, errors="coerce")
    strict = stamps.dt.strftime(MONTH_FORMAT) == raw_months
    periods = stamps.dt.to_period("M")

    start: Optional[pd.Period] = None
    previous: Optional[pd.Period] = None
    values: List[float] = []
    for row, line in enumerate(range(2, len(frame) + 1)):
        month_text, value_text = body.iat[row, 0], body.iat[row, 1]
        if not month_text.strip() and not value_text.strip():
            continue
        if not strict.iat[row]:
            raise ParseError(line, f"month {month_text!r} is not YYYY-MM", source)
        month = periods.iat[row]
        value = _parse_value(value_text, line, source)
        if previous is not None:
            step = month.ordinal - previous.ordinal
            if step <= 0:
                raise NonMonotonic(month.strftime(MONTH_FORMAT), source)
            if step > 1:
                raise GapError((previous + 1).strftime(MONTH_FORMAT), source)
        else:
            start = month
        previous = month
        values.append(value)

    if start is None:
        raise ParseError(len(frame), "no data rows", source)
    series = TimeSeries(start=MonthStamp.from_period(start), values=tuple(values), name=name or path.stem)
    logger.info("Read %d months (%s..%s) from %s", len(series), series.start, series.end, path)
    return series


def _format_value(value: float) -> str:
    if value.is_integer() and abs(value) < 2 ** 53:
        return str(int(value))
    return repr(value)


def write_csv(series: TimeSeries, path: PathLike) -> Path:
    """
    Write a series so that :func:`ingest_csv` reads it back unchanged.

    Args:
        series: Series to write
        path: Destination; parent directories are created

    Returns:
        The written path
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame({
        HEADER[0]: pd.period_range(series.start.to_period(), periods=len(series), freq="M").strftime(MONTH_FORMAT),
        HEADER[1]: [_format_value(value) for value in series.values],
    })
    frame.to_csv(path, index=False, encoding="utf-8", lineterminator="\n")
    return path


def load_bundle(config: RunConfig) -> DatasetBundle:
    """
    Target and optional regressor named by the run config.

    Args:
        config: Supplies ``data_dir``, ``target`` and ``regressor``

    Returns:
        DatasetBundle keyed by regressor file stem

    Raises:
        InputNotFound: If a named file is missing
        MisalignedRegressor: If the regressor covers other months than the target
    """
    target = ingest_csv(config.target_path)
    regressors = {}
    if config.regressor_path is not None:
        regressor = ingest_csv(config.regressor_path)
        if not regressor.aligned_with(target):
            raise MisalignedRegressor(
                f"Regressor {config.regressor_path} covers {regressor.start}..{regressor.end}, "
                f"target {config.target_path} covers {target.start}..{target.end}"
            )
        regressors[regressor.name] = regressor
    provenance = ", ".join(str(p) for p in (config.target_path, config.regressor_path) if p is not None)
    return DatasetBundle(target=target, regressors=regressors, provenance=provenance)


def synth_components(n_months: int, params: Optional[SynthParams] = None) -> Dict[str, np.ndarray]:
    """
    Noise-free additive parts of the synthetic target.

    Args:
        n_months: Series length
        params: Shape parameters; defaults to SynthParams()

    Returns:
        ``baseline``, ``trend``, ``seasonal`` and ``spike`` arrays of length
        ``n_months``; the spike array is zero except at the spike month, where
        it lifts the level to ``spike_factor`` times its noise-free value
    """
    params = params or SynthParams()
    start = MonthStamp.parse(params.start)
    t = np.arange(n_months, dtype=float)
    knee = round(params.break_fraction * n_months)

    baseline = np.full(n_months, params.baseline)
    trend = params.slope * t + (params.steep_slope - params.slope) * np.maximum(t - knee, 0.0)
    calendar = (start.month - 1 + np.arange(n_months)) % 12
    seasonal = np.asarray(params.seasonal_profile, dtype=float)[calendar]
    spike = np.zeros(n_months)
    if params.spike_month:
        at = start.months_until(MonthStamp.parse(params.spike_month))
        if 0 <= at < n_months:
            spike[at] = (params.spike_factor - 1.0) * (baseline[at] + trend[at] + seasonal[at])
    return {"baseline": baseline, "trend": trend, "seasonal": seasonal, "spike": spike}


def synth_dataset(seed: int, n_months: int = 168, params: Optional[SynthParams] = None) -> DatasetBundle:
    """
    Seeded visitor series with a steepening trend, a July/August peak and one spike month.

    The target is the sum of :func:`synth_components` plus Gaussian noise with
    standard deviation ``params.noise``, rounded and floored at zero. The
    companion ``google_trend`` index is the target mapped affinely onto
    [index_low, index_high] plus independent noise, clipped to [0, 100] and
    rounded to whole points.

    Args:
        seed: Seed of the single generator behind both noise draws
        n_months: Series length, at least 36
        params: Shape parameters; defaults to SynthParams()

    Returns:
        DatasetBundle with the ``visitors`` target and ``google_trend`` regressor

    Raises:
        UsageError: If ``n_months`` is below 36
    """
    if n_months < MIN_SYNTH_MONTHS:
        raise UsageError(f"Synthetic data needs at least {MIN_SYNTH_MONTHS} months, got {n_months}")
    params = params or SynthParams()
    rng = np.random.default_rng(seed)
    start = MonthStamp.parse(params.start)

    structural = sum(synth_components(n_months, params).values())
    values = structural + params.noise * rng.standard_normal(n_months)
    target = TimeSeries.from_array(np.maximum(np.round(values), 0.0), start=start, name="visitors")

    scaled = scale_to_range(target, params.index_low, params.index_high).array
    index = np.clip(np.round(scaled + params.index_noise * rng.standard_normal(n_months)), 0.0, 100.0)
    google_trend = TimeSeries.from_array(index, start=start, name="google_trend")

    logger.info("Generated %d synthetic months from %s with seed %d", n_months, start, seed)
    return DatasetBundle(
        target=target,
        regressors={"google_trend": google_trend},
        provenance=f"synthetic seed={seed} months={n_months}",
    )
