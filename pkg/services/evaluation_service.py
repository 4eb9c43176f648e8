"""
RMSE, the rolling one-step evaluation protocol and the model comparison harness.

Every evaluation splits the series the same way: the last ``n_test`` months
are predicted one at a time from actual observations before them. Regressor
values for a test month are the realised ones.
"""
import hashlib
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from typing import List, Mapping, Optional, Sequence, Tuple

import numpy as np

from schemas.arima import ArimaOrder, SeasonalOrder
from schemas.evaluation import ArimaSpec, ComparisonTable, EvalReport, HybridSpec, ModelSpec, SvrSpec
from schemas.hybrid import HybridConfig
from schemas.run import RunConfig, SavedModel
from schemas.series import TimeSeries
from schemas.svr import KernelSpec, SvrConfig
from services import arima_service, hybrid_service, svr_service
from services.errors import (
    DataError,
    EmptyInput,
    HistoryTooShort,
    LengthMismatch,
    MisalignedRegressor,
    MissingComponentInput,
    MissingExogenous,
    UsageError,
)
from services.series_service import make_supervised, split_train_test

logger = logging.getLogger(__name__)


def rmse(actual: Sequence[float], predicted: Sequence[float]) -> float:
    """
    Root mean squared error in the units of ``actual``.

    Raises:
        LengthMismatch: If the sequences differ in length
        EmptyInput: If both are empty
    """
    actual = np.asarray(actual, dtype=float)
    predicted = np.asarray(predicted, dtype=float)
    if actual.shape != predicted.shape:
        raise LengthMismatch(f"Cannot compare {actual.size} actual values with {predicted.size} predictions")
    if actual.size == 0:
        raise EmptyInput("RMSE of an empty window is undefined")
    errors = actual - predicted
    return float(np.sqrt(np.mean(errors * errors)))


def fingerprint_slices(train: TimeSeries, test: TimeSeries) -> str:
    """
    SHA-256 over the months and values of a train/test pair.

    Args:
        train: Slice the first fit was estimated on
        test: Slice whose months were predicted

    Returns:
        Hex digest; equal digests mean byte-identical splits
    """
    digest = hashlib.sha256()
    for part in (train, test):
        digest.update(str(part.start).encode())
        digest.update(len(part).to_bytes(8, "little"))
        digest.update(part.array.tobytes())
    return digest.hexdigest()


def split_fingerprint(series: TimeSeries, n_test: int) -> str:
    """Fingerprint of the canonical split holding out the last ``n_test`` months."""
    return fingerprint_slices(*split_train_test(series, n_test))


def _report(label: str, train: TimeSeries, test: TimeSeries, predictions: np.ndarray, n_fits: int) -> EvalReport:
    actuals = test.array
    errors = actuals - np.asarray(predictions, dtype=float)
    return EvalReport(
        model_label=label,
        months=tuple(str(m) for m in test.months()),
        actuals=test.values,
        predictions=tuple(float(v) for v in predictions),
        per_step_error=tuple(float(e) for e in errors),
        rmse=float(np.sqrt(np.mean(errors * errors))),
        n_fits=n_fits,
        split_fingerprint=fingerprint_slices(train, test),
    )


def _check_exog(series: TimeSeries, exog: Sequence[TimeSeries]) -> None:
    for x in exog:
        if not x.aligned_with(series):
            raise MisalignedRegressor(
                f"Regressor '{x.name}' ({x.start}, {len(x)} months) does not match "
                f"'{series.name}' ({series.start}, {len(series)} months)"
            )


def rolling_eval_arima(
    series: TimeSeries,
    order: ArimaOrder,
    seasonal: Optional[SeasonalOrder] = None,
    exog: Optional[Sequence[TimeSeries]] = None,
    n_test: int = 12,
    refit: bool = True,
    label: str = "arima",
) -> EvalReport:
    """
    Expanding-window one-step forecasts; ``refit`` re-estimates before every month.

    Args:
        series: Full target; the last ``n_test`` months are predicted
        order: Non-seasonal (p, d, q)
        seasonal: Seasonal part, or None
        exog: Regressors aligned with ``series``; realised values feed each step
        n_test: Months predicted
        refit: Fit before every month instead of once on the training slice
        label: Report label

    Returns:
        EvalReport whose fingerprint covers the first training slice and the test window

    Raises:
        MisalignedRegressor: If a regressor covers other months
        SplitTooLarge: If no training month would remain
    """
    exog = list(exog or [])
    _check_exog(series, exog)
    split_train_test(series, n_test)
    first = len(series) - n_test
    test = series.slice(first, len(series))

    model = None
    n_fits = 0
    predictions = np.zeros(n_test)
    for step in range(n_test):
        cut = first + step
        history = series.slice(0, cut)
        exog_history = [x.slice(0, cut) for x in exog]
        if refit or model is None:
            model = arima_service.fit(history, order, seasonal, exog_history, label=label)
            n_fits += 1
        exog_next = [x.values[cut] for x in exog] if exog else None
        predictions[step] = arima_service.forecast_one_step(model, history, exog_next, exog_history or None)
        logger.debug("%s step %d/%d: predicted %.6g for %s", label, step + 1, n_test, predictions[step], series.start.shift(cut))
    return _report(label, series.slice(0, first), test, predictions, n_fits)


def rolling_eval_svr(
    series: TimeSeries,
    config: Optional[SvrConfig] = None,
    lags: int = 3,
    n_test: int = 12,
    refit: bool = False,
    label: str = "svr",
) -> EvalReport:
    """SVR on the last ``lags`` observations; fitted once on the training slice unless ``refit``."""
    config = config or SvrConfig()
    train, test = split_train_test(series, n_test)
    first = len(train)
    if not refit:
        model = svr_service.fit(make_supervised(train, lags), config, label=label)
        predictions = svr_service.forecast_rolling(model, series, lags, n_test)
        return _report(label, train, test, predictions, 1)

    values = series.array
    predictions = np.zeros(n_test)
    for step in range(n_test):
        cut = first + step
        model = svr_service.fit(make_supervised(series.slice(0, cut), lags), config, label=label)
        predictions[step] = svr_service.predict(model, values[cut - lags:cut])
    return _report(label, train, test, predictions, n_test)


def rolling_eval_hybrid(
    series: TimeSeries,
    config: Optional[HybridConfig] = None,
    regressors: Optional[Sequence[TimeSeries]] = None,
    n_test: int = 12,
    refit: bool = False,
    label: str = "hybrid",
) -> EvalReport:
    """Hybrid model with observed lags; fitted once on the training slice unless ``refit``."""
    config = config or HybridConfig()
    regressors = list(regressors or [])
    _check_exog(series, regressors)
    split_train_test(series, n_test)
    first = len(series) - n_test
    train = series.slice(0, first)
    test = series.slice(first, len(series))
    if not refit:
        model = hybrid_service.fit(config, train, [x.slice(0, first) for x in regressors], label=label)
        predictions = hybrid_service.forecast_rolling(model, series, regressors, n_test)
        return _report(label, train, test, predictions, 1)

    predictions = np.zeros(n_test)
    for step in range(n_test):
        cut = first + step
        model = hybrid_service.fit(config, series.slice(0, cut), [x.slice(0, cut) for x in regressors], label=label)
        predictions[step] = hybrid_service.forecast_rolling(
            model, series.slice(0, cut + 1), [x.slice(0, cut + 1) for x in regressors], 1
        )[0]
    return _report(label, train, test, predictions, n_test)


def evaluate(spec: ModelSpec, series: TimeSeries, exog: Sequence[TimeSeries], n_test: int) -> EvalReport:
    """
    Run one suite entry through its rolling protocol.

    Raises:
        UsageError: If ``spec`` is not an ARIMA, SVR or hybrid entry
    """
    started = time.perf_counter()
    if isinstance(spec, ArimaSpec):
        report = rolling_eval_arima(
            series, spec.order, spec.seasonal, list(exog) if spec.use_exog else None, n_test, spec.refit, spec.label
        )
    elif isinstance(spec, SvrSpec):
        report = rolling_eval_svr(series, spec.config, spec.lags, n_test, spec.refit, spec.label)
    elif isinstance(spec, HybridSpec):
        report = rolling_eval_hybrid(
            series, spec.config, list(exog) if spec.use_exog else None, n_test, spec.refit, spec.label
        )
    else:
        raise UsageError(f"Unknown model spec: {spec!r}")
    logger.info(
        "Evaluated %s: rmse=%.2f over %d months, %d fits (%.2fs)",
        report.model_label, report.rmse, n_test, report.n_fits, time.perf_counter() - started,
    )
    return report


def compare(
    series: TimeSeries,
    exog: Sequence[TimeSeries],
    n_test: int,
    suite: Sequence[ModelSpec],
    workers: int = 1,
) -> ComparisonTable:
    """
    Evaluate every suite entry on the same split; rows sorted by RMSE, ties in suite order.

    Args:
        series: Full target
        exog: Regressors offered to entries with ``use_exog``
        n_test: Months held out
        suite: Entries to evaluate
        workers: Threads used to evaluate entries concurrently

    Returns:
        ComparisonTable carrying the fingerprint of the canonical split

    Raises:
        UsageError: If the suite is empty
        DataError: If an entry reports a fingerprint for any other split
    """
    if not suite:
        raise UsageError("The model suite is empty")
    exog = list(exog)
    fingerprint = split_fingerprint(series, n_test)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(lambda spec: evaluate(spec, series, exog, n_test), suite))
    else:
        reports = [evaluate(spec, series, exog, n_test) for spec in suite]

    for report in reports:
        if report.split_fingerprint != fingerprint:
            raise DataError(f"Model '{report.model_label}' was evaluated on a different split")
    ranked = sorted(reports, key=lambda r: r.rmse)
    return ComparisonTable(reports=tuple(ranked), n_test=n_test, split_fingerprint=fingerprint)


def default_suite(seed: int = 7) -> List[ModelSpec]:
    """ARIMA(3,1,0), SARIMA(3,1,0)(1,1,0,12), the same with regressors, RBF SVR and the hybrid."""
    return build_suite(RunConfig(seed=seed))


def build_suite(config: RunConfig) -> List[ModelSpec]:
    """Suite entries for ``config.models`` in the order given."""
    order = config.arima_order
    seasonal = config.seasonal_order

    def refit(default: bool) -> bool:
        return default if config.refit is None else config.refit

    specs = {
        "arima": lambda: ArimaSpec(label="arima", order=order, refit=refit(True)),
        "sarima": lambda: ArimaSpec(label="sarima", order=order, seasonal=seasonal, refit=refit(True)),
        "sarimax": lambda: ArimaSpec(
            label="sarimax", order=order, seasonal=seasonal, use_exog=True, refit=refit(True)
        ),
        "svr": lambda: SvrSpec(
            label="svr",
            config=SvrConfig(c=config.svr_c, epsilon=config.svr_epsilon, kernel=KernelSpec(kind=config.svr_kernel)),
            lags=config.svr_lags,
            refit=refit(False),
        ),
        "hybrid": lambda: HybridSpec(
            label="hybrid",
            config=HybridConfig(
                season_terms=config.hybrid_season_terms,
                ar_lags=config.hybrid_ar_lags,
                reg_lags=config.hybrid_reg_lags,
                hidden_layers=config.hybrid_hidden,
                learning_rate=config.hybrid_learning_rate,
                epochs=config.hybrid_epochs,
                batch_size=config.hybrid_batch_size,
                seed=config.seed,
            ),
            use_exog=config.hybrid_reg_lags > 0,
            refit=refit(False),
        ),
    }
    return [specs[label]() for label in config.models]


def _select_regressors(names: Sequence[str], available: Mapping[str, TimeSeries]) -> List[TimeSeries]:
    missing = [name for name in names if name not in available]
    if missing:
        raise MissingExogenous(f"Regressor(s) {', '.join(missing)} are not in the dataset")
    return [available[name] for name in names]


def fit_spec(spec: ModelSpec, series: TimeSeries, regressors: Mapping[str, TimeSeries]) -> SavedModel:
    """
    Fit one suite entry on the whole series for later forecasting.

    Raises:
        MissingExogenous: If the entry uses regressors the dataset lacks
    """
    uses_exog = not isinstance(spec, SvrSpec) and spec.use_exog
    names = tuple(regressors) if uses_exog else ()
    exog = _select_regressors(names, regressors)
    if isinstance(spec, ArimaSpec):
        saved = {"kind": "arima", "arima": arima_service.fit(series, spec.order, spec.seasonal, exog, label=spec.label)}
    elif isinstance(spec, SvrSpec):
        saved = {"kind": "svr", "svr": svr_service.fit(make_supervised(series, spec.lags), spec.config, label=spec.label)}
    else:
        saved = {"kind": "hybrid", "hybrid": hybrid_service.fit(spec.config, series, exog, label=spec.label)}
    return SavedModel(label=spec.label, trained_until=str(series.end), regressors=names, **saved)


def _svr_path(model, values: List[float], horizon: int) -> np.ndarray:
    p = model.n_features
    if len(values) < p:
        raise HistoryTooShort(f"SVR '{model.label}' needs {p} observations, got {len(values)}")
    for _ in range(horizon):
        values.append(svr_service.predict(model, values[-p:]))
    return np.asarray(values[-horizon:])


def _hybrid_path(model, series: TimeSeries, exog: List[TimeSeries], horizon: int) -> np.ndarray:
    if model.future_weights:
        raise MissingComponentInput(f"Hybrid '{model.label}' needs known-future regressor values to forecast")
    if model.reg_weights and horizon > 1:
        raise UsageError(f"Hybrid '{model.label}' uses lagged regressors; only one-step forecasts are possible")
    values = list(series.values)
    p = model.ar_lags
    if len(values) < max([p] + [net.lags for net in model.reg_weights]):
        raise HistoryTooShort(f"Hybrid '{model.label}' needs more history than {len(values)} months")
    origin = model.origin or series.start
    for step in range(horizon):
        month = series.end.shift(step + 1)
        lags = values[::-1][:p] if p else None
        reg_lags = [x.values[::-1][:net.lags] for x, net in zip(exog, model.reg_weights)] or None
        values.append(hybrid_service.model_forward(model, origin.months_until(month), lags, reg_lags))
    return np.asarray(values[-horizon:])


def forecast_saved(
    saved: SavedModel,
    series: TimeSeries,
    regressors: Mapping[str, TimeSeries],
    horizon: int = 1,
    exog_next: Sequence[float] = (),
) -> Tuple[List[str], np.ndarray]:
    """
    Months after the end of ``series`` and their predictions from a saved model.

    Args:
        saved: Output of :func:`fit_spec`
        series: History ending in the month before the first forecast
        regressors: Dataset regressors by name; the saved model picks its own
        horizon: Months to forecast
        exog_next: Future regressor values, month-major, for ARIMA with regressors

    Returns:
        (months, predictions)

    Raises:
        UsageError: On a non-positive horizon, or a multi-step hybrid with lagged regressors
        MissingExogenous: If a needed regressor or its future values are missing
        HistoryTooShort: If ``series`` cannot fill the model's lags
    """
    if horizon < 1:
        raise UsageError(f"Horizon must be positive, got {horizon}")
    exog = _select_regressors(saved.regressors, regressors)
    _check_exog(series, exog)
    months = [str(series.end.shift(step + 1)) for step in range(horizon)]
    model = saved.model
    if saved.kind == "arima":
        future = None
        if model.has_exog:
            k = len(model.exog_beta)
            if len(exog_next) != horizon * k:
                raise MissingExogenous(
                    f"Model '{saved.label}' needs {horizon * k} future regressor values "
                    f"({k} per month for {horizon} months), got {len(exog_next)}"
                )
            future = np.asarray(exog_next, dtype=float).reshape(horizon, k).tolist()
        return months, arima_service.forecast_path(model, series, horizon, future, exog or None)
    if saved.kind == "svr":
        return months, _svr_path(model, list(series.values), horizon)
    return months, _hybrid_path(model, series, exog, horizon)
