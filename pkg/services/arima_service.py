"""
ARIMA, SARIMA and SARIMAX estimation by conditional sum of squares (CSS).

Regressors enter as regression with SARIMA errors on the differenced scale.
The intercept and regressor coefficients are linear given the ARMA
coefficients, so they are concentrated out by least squares and the
Nelder-Mead search only runs over the ARMA coefficients.
"""
import logging
import time
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize
from scipy.signal import lfilter

from schemas.arima import ArimaModel, ArimaOrder, SeasonalOrder
from schemas.series import TimeSeries
from services.errors import (
    HistoryTooShort,
    MisalignedRegressor,
    MissingExogenous,
    NonConvergence,
    SeriesTooShort,
    SingularDesign,
    UsageError,
)
from services.series_service import concatenate, difference, difference_polynomial, difference_values

logger = logging.getLogger(__name__)

NELDER_MEAD_XATOL = 1e-8
NELDER_MEAD_MAXITER = 2000
ROOT_WARNING_MODULUS = 1.02


def expand_lag_polynomial(nonseasonal: Sequence[float], seasonal: Sequence[float], M: int) -> np.ndarray:
    """Coefficients of (1 - sum a_i L^i)(1 - sum b_j L^{jM}) on the right-hand side.

    Element ``k - 1`` multiplies ``y_{t-k}`` in ``y_t = sum_k c_k y_{t-k} + ...``.
    """
    a = np.asarray(nonseasonal, dtype=float)
    b = np.asarray(seasonal, dtype=float)
    if b.size == 0:
        return a.copy()
    left = np.concatenate([[1.0], -a])
    right = np.zeros(b.size * M + 1)
    right[0] = 1.0
    right[M::M] = -b
    return -np.convolve(left, right)[1:]


def _ma_polynomial(theta: Sequence[float], seasonal_theta: Sequence[float], M: int) -> np.ndarray:
    """Coefficients of (1 + sum theta_i L^i)(1 + sum Theta_j L^{jM}) beyond lag 0."""
    return -expand_lag_polynomial(-np.asarray(theta, dtype=float), -np.asarray(seasonal_theta, dtype=float), M)


def _validate_order(order: ArimaOrder, seasonal: SeasonalOrder) -> None:
    arma_terms = order.p + order.q + seasonal.P + seasonal.Q
    if arma_terms == 0 and order.d + seasonal.D == 0:
        raise UsageError(f"ARIMA{order}{seasonal} is an intercept-only model; add AR/MA terms or differencing")


class _CssProblem:
    """CSS objective for one differenced series and its differenced regressors."""

    def __init__(
        self,
        w: np.ndarray,
        X: np.ndarray,
        order: ArimaOrder,
        seasonal: SeasonalOrder,
        include_intercept: bool,
    ):
        self.w = w
        self.X = X
        self.order = order
        self.seasonal = seasonal
        self.include_intercept = include_intercept

    def unpack(self, params: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        p, q = self.order.p, self.order.q
        P = self.seasonal.P
        return params[:p], params[p:p + q], params[p + q:p + q + P], params[p + q + P:]

    def polynomials(self, params: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        phi, theta, sphi, stheta = self.unpack(params)
        M = self.seasonal.M
        return expand_lag_polynomial(phi, sphi, M), _ma_polynomial(theta, stheta, M)

    def solve(self, params: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Residuals and the concentrated [intercept?, exog...] coefficients."""
        ar, ma = self.polynomials(params)
        filtered_target = _arma_filter(self.w, ar, ma)
        columns = []
        if self.include_intercept:
            columns.append(lfilter([1.0], np.concatenate([[1.0], ma]), np.ones(len(filtered_target))))
        for j in range(self.X.shape[1]):
            columns.append(_arma_filter(self.X[:, j], ar, ma))
        if not columns:
            return filtered_target, np.zeros(0)
        design = np.column_stack(columns)
        coef, _, _, _ = np.linalg.lstsq(design, filtered_target, rcond=None)
        return filtered_target - design @ coef, coef

    def objective(self, params: np.ndarray) -> float:
        with np.errstate(all="ignore"):
            resid, _ = self.solve(params)
            value = float(resid @ resid)
        return value if np.isfinite(value) else np.inf


def _arma_filter(v: np.ndarray, ar: np.ndarray, ma: np.ndarray) -> np.ndarray:
    """e_t = v_t - sum ar_k v_{t-k} - sum ma_j e_{t-j} for t >= len(ar); pre-sample e = 0."""
    z = np.convolve(v, np.concatenate([[1.0], -ar]), mode="valid") if ar.size else v.copy()
    if ma.size and np.any(ma):
        return lfilter([1.0], np.concatenate([[1.0], ma]), z)
    return z


def _lag_matrix(values: np.ndarray, lags: Sequence[int], start: int) -> np.ndarray:
    n = len(values)
    return np.column_stack([values[start - lag:n - lag] for lag in lags]) if lags else np.zeros((n - start, 0))


def _hannan_rissanen(w: np.ndarray, order: ArimaOrder, seasonal: SeasonalOrder, include_intercept: bool) -> np.ndarray:
    """Initial ARMA coefficients from a long-AR residual proxy and one OLS pass."""
    M = seasonal.M
    ar_lags = list(range(1, order.p + 1)) + [j * M for j in range(1, seasonal.P + 1)]
    ma_lags = list(range(1, order.q + 1)) + [j * M for j in range(1, seasonal.Q + 1)]
    n = len(w)

    e_hat = np.zeros(n)
    long_order = 0
    if ma_lags:
        long_order = min(max(max(ma_lags + ar_lags) + 1, 10), max(n // 2 - 1, 1))
        long_design = np.column_stack([np.ones(n - long_order), _lag_matrix(w, list(range(1, long_order + 1)), long_order)])
        coef, _, _, _ = np.linalg.lstsq(long_design, w[long_order:], rcond=None)
        e_hat[long_order:] = w[long_order:] - long_design @ coef

    start = long_order + max(ar_lags + ma_lags, default=0)
    if start >= n - 1:
        return np.zeros(len(ar_lags) + len(ma_lags))
    blocks = [_lag_matrix(w, ar_lags, start), _lag_matrix(e_hat, ma_lags, start)]
    if include_intercept:
        blocks.insert(0, np.ones((n - start, 1)))
    design = np.column_stack(blocks)
    if design.shape[1] == 0:
        return np.zeros(0)
    coef, _, _, _ = np.linalg.lstsq(design, w[start:], rcond=None)
    if include_intercept:
        coef = coef[1:]
    ar_coef, ma_coef = coef[:len(ar_lags)], coef[len(ar_lags):]
    # reorder to [phi, theta, seasonal_phi, seasonal_theta]
    return np.concatenate([
        ar_coef[:order.p],
        ma_coef[:order.q],
        ar_coef[order.p:],
        ma_coef[order.q:],
    ])


def _differenced_exog(exog: Sequence[TimeSeries], d: int, D: int, M: int, rows: int) -> np.ndarray:
    if not exog:
        return np.zeros((rows, 0))
    return np.column_stack([difference_values(x.array, d, D, M) for x in exog])


def _ar_roots_warning(ar: np.ndarray) -> bool:
    if ar.size == 0 or not np.any(ar):
        return False
    # roots of 1 - sum ar_k z^k, highest degree first for np.roots
    coefficients = np.concatenate([-ar[::-1], [1.0]])
    roots = np.roots(coefficients)
    return bool(roots.size and np.min(np.abs(roots)) <= ROOT_WARNING_MODULUS)


def fit(
    series: TimeSeries,
    order: ArimaOrder,
    seasonal: Optional[SeasonalOrder] = None,
    exog: Optional[Sequence[TimeSeries]] = None,
    label: str = "arima",
) -> ArimaModel:
    """
    Estimate a regression-with-SARIMA-errors model by CSS.

    The intercept is included only when d + D = 0. With no MA terms, no
    seasonal AR and no regressors the CSS minimiser is the ordinary least
    squares autoregression and is computed directly.

    Args:
        series: Observations on the original scale
        order: Non-seasonal (p, d, q)
        seasonal: Seasonal (P, D, Q, M); None means no seasonal part
        exog: Regressors covering exactly the months of ``series``
        label: Name carried into logs and reports

    Returns:
        Fitted ArimaModel with the differencing pivots and the CSS at the estimate

    Raises:
        UsageError: If the order has no AR, MA or differencing terms
        MisalignedRegressor: If a regressor covers other months
        SeriesTooShort: If too few residuals remain after differencing
        SingularDesign: If the differenced regressors are collinear
        NonConvergence: If the Nelder-Mead search hits its iteration cap
    """
    seasonal = seasonal or SeasonalOrder()
    _validate_order(order, seasonal)
    exog = list(exog or [])
    for x in exog:
        if not x.aligned_with(series):
            raise MisalignedRegressor(
                f"Regressor '{x.name}' ({x.start}, {len(x)} months) does not match "
                f"'{series.name}' ({series.start}, {len(series)} months)"
            )

    d, D, M = order.d, seasonal.D, seasonal.M
    started = time.perf_counter()
    w = difference(series, d, D, M).array
    X = _differenced_exog(exog, d, D, M, len(w))
    include_intercept = d + D == 0

    n_ar = order.p + seasonal.P * M
    n_params = order.p + order.q + seasonal.P + seasonal.Q + X.shape[1] + int(include_intercept)
    if len(w) <= n_params + n_ar:
        raise SeriesTooShort(
            f"ARIMA{order}{seasonal} needs more than {n_params + n_ar} differenced observations, "
            f"'{series.name}' has {len(w)}"
        )

    regressors = np.column_stack([np.ones(len(w))] + [X]) if include_intercept else X
    if regressors.shape[1] and np.linalg.matrix_rank(regressors) < regressors.shape[1]:
        raise SingularDesign(f"Regressors for '{series.name}' are collinear after differencing")

    problem = _CssProblem(w, X, order, seasonal, include_intercept)
    params = _hannan_rissanen(w, order, seasonal, include_intercept)
    start_value = problem.objective(params)
    iterations = 0
    direct = order.q == 0 and seasonal.Q == 0 and seasonal.P == 0 and not exog
    exact_fit = start_value <= 1e-18 * max(1.0, float(w @ w))
    if params.size and not direct and not exact_fit:
        result = minimize(
            problem.objective,
            params,
            method="Nelder-Mead",
            options={"xatol": NELDER_MEAD_XATOL, "fatol": np.inf, "maxiter": NELDER_MEAD_MAXITER},
        )
        iterations = int(result.nit)
        if result.status == 2 or iterations >= NELDER_MEAD_MAXITER:
            raise NonConvergence(
                f"CSS search for ARIMA{order}{seasonal} on '{series.name}' hit {NELDER_MEAD_MAXITER} iterations"
            )
        if result.fun <= start_value:
            params = np.asarray(result.x, dtype=float)

    resid, coef = problem.solve(params)
    css = float(resid @ resid)
    intercept = float(coef[0]) if include_intercept else 0.0
    beta = coef[1:] if include_intercept else coef
    phi, theta, sphi, stheta = problem.unpack(params)
    ar, _ = problem.polynomials(params)
    warning = _ar_roots_warning(ar)
    if warning:
        logger.warning("ARIMA%s%s on '%s' has an AR root with modulus <= %.2f", order, seasonal, series.name, ROOT_WARNING_MODULUS)

    model = ArimaModel(
        order=order,
        seasonal=seasonal,
        phi=tuple(float(v) for v in phi),
        theta=tuple(float(v) for v in theta),
        seasonal_phi=tuple(float(v) for v in sphi),
        seasonal_theta=tuple(float(v) for v in stheta),
        exog_beta=tuple(float(v) for v in beta),
        intercept=intercept,
        sigma2=css / len(resid),
        pivots=series.values[:d + D * M],
        css=css,
        n_residuals=len(resid),
        stationarity_warning=warning,
        iterations=iterations,
        label=label,
    )
    logger.info(
        "Fitted %s ARIMA%s%s on %d observations: css=%.6g sigma2=%.6g iterations=%d (%.2fs)",
        label, order, seasonal, len(series), css, model.sigma2, iterations, time.perf_counter() - started,
    )
    return model


def css_objective(model: ArimaModel, series: TimeSeries, exog: Optional[Sequence[TimeSeries]] = None) -> float:
    """Concentrated CSS of ``series`` at the model's ARMA coefficients."""
    exog = list(exog or [])
    d, D, M = model.order.d, model.seasonal.D, model.seasonal.M
    w = difference(series, d, D, M).array
    problem = _CssProblem(w, _differenced_exog(exog, d, D, M, len(w)), model.order, model.seasonal, d + D == 0)
    return problem.objective(_pack(model))


def initial_css(series: TimeSeries, order: ArimaOrder, seasonal: Optional[SeasonalOrder] = None,
                exog: Optional[Sequence[TimeSeries]] = None) -> float:
    """CSS at the Hannan-Rissanen starting point used by :func:`fit`."""
    seasonal = seasonal or SeasonalOrder()
    exog = list(exog or [])
    d, D, M = order.d, seasonal.D, seasonal.M
    w = difference(series, d, D, M).array
    include_intercept = d + D == 0
    problem = _CssProblem(w, _differenced_exog(exog, d, D, M, len(w)), order, seasonal, include_intercept)
    return problem.objective(_hannan_rissanen(w, order, seasonal, include_intercept))


def _pack(model: ArimaModel) -> np.ndarray:
    return np.array(model.phi + model.theta + model.seasonal_phi + model.seasonal_theta, dtype=float)


def _model_polynomials(model: ArimaModel) -> Tuple[np.ndarray, np.ndarray]:
    M = model.seasonal.M
    return (
        expand_lag_polynomial(model.phi, model.seasonal_phi, M),
        _ma_polynomial(model.theta, model.seasonal_theta, M),
    )


def _check_exog(model: ArimaModel, history: TimeSeries, exog_history: Optional[Sequence[TimeSeries]]) -> List[TimeSeries]:
    if not model.has_exog:
        return []
    exog_history = list(exog_history or [])
    if len(exog_history) != len(model.exog_beta):
        raise MissingExogenous(
            f"Model '{model.label}' needs {len(model.exog_beta)} regressor histories, got {len(exog_history)}"
        )
    for x in exog_history:
        if not x.aligned_with(history):
            raise MisalignedRegressor(f"Regressor '{x.name}' does not cover the history of '{history.name}'")
    return exog_history


def _filtered_state(model: ArimaModel, y: np.ndarray, X: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Regression-adjusted differenced values v and residuals e aligned with v."""
    d, D, M = model.order.d, model.seasonal.D, model.seasonal.M
    w = difference_values(y, d, D, M)
    v = w - X[:len(w)] @ np.asarray(model.exog_beta) if X.shape[1] else w
    ar, ma = _model_polynomials(model)
    e = np.zeros(len(v))
    if len(v) > ar.size:
        z = np.convolve(v, np.concatenate([[1.0], -ar]), mode="valid") if ar.size else v.copy()
        z = z - model.intercept
        e[ar.size:] = lfilter([1.0], np.concatenate([[1.0], ma]), z) if ma.size and np.any(ma) else z
    return v, e


def forecast_one_step(
    model: ArimaModel,
    history: TimeSeries,
    exog_next: Optional[Sequence[float]] = None,
    exog_history: Optional[Sequence[TimeSeries]] = None,
) -> float:
    """
    Conditional-mean prediction of the month after ``history`` on the original scale.

    Args:
        model: Fitted model
        history: Observed values up to the month before the forecast
        exog_next: Regressor values for the forecast month, one per regressor
        exog_history: Regressors aligned with ``history``

    Returns:
        The one-step forecast

    Raises:
        MissingExogenous: If the model has regressors and their values are missing
        HistoryTooShort: If ``history`` cannot fill the model's lags
    """
    exog_history = _check_exog(model, history, exog_history)
    if model.has_exog and (exog_next is None or len(exog_next) != len(model.exog_beta)):
        raise MissingExogenous(f"Model '{model.label}' needs {len(model.exog_beta)} regressor values for the next month")

    ar, ma = _model_polynomials(model)
    nd = model.n_diff
    y = history.array
    n = len(y)
    if n < max(nd, 1) or n - nd < ar.size:
        raise HistoryTooShort(
            f"Forecasting with '{model.label}' needs at least {nd + ar.size} observations, got {n}"
        )

    d, D, M = model.order.d, model.seasonal.D, model.seasonal.M
    if exog_history:
        X = np.column_stack([
            difference_values(np.append(x.array, float(x_next)), d, D, M)
            for x, x_next in zip(exog_history, exog_next)
        ])
        exog_term = float(X[-1] @ np.asarray(model.exog_beta))
    else:
        X = np.zeros((n - nd + 1, 0))
        exog_term = 0.0

    v, e = _filtered_state(model, y, X)
    m = len(v)
    u_hat = model.intercept
    for k in range(1, ar.size + 1):
        u_hat += ar[k - 1] * v[m - k]
    for j in range(1, ma.size + 1):
        if m - j >= 0:
            u_hat += ma[j - 1] * e[m - j]
    w_hat = u_hat + exog_term

    poly = difference_polynomial(d, D, M)
    y_hat = w_hat
    for k in range(1, nd + 1):
        y_hat -= poly[k] * y[n - k]
    return float(y_hat)


def forecast_path(
    model: ArimaModel,
    history: TimeSeries,
    h: int,
    exog_future: Optional[Sequence[Sequence[float]]] = None,
    exog_history: Optional[Sequence[TimeSeries]] = None,
) -> np.ndarray:
    """
    Recursive h-step forecast feeding predictions back as lags.

    Args:
        model: Fitted model
        history: Observed values before the first forecast month
        h: Horizon in months
        exog_future: One row of regressor values per forecast month
        exog_history: Regressors aligned with ``history``

    Returns:
        Array of ``h`` forecasts

    Raises:
        UsageError: If ``h`` is not positive
        MissingExogenous: If future regressor rows are missing
    """
    if h < 1:
        raise UsageError(f"Horizon must be positive, got {h}")
    exog_history = _check_exog(model, history, exog_history)
    if model.has_exog and (exog_future is None or len(exog_future) != h):
        raise MissingExogenous(f"Model '{model.label}' needs {h} rows of future regressor values")

    predictions = np.zeros(h)
    for step in range(h):
        row = list(exog_future[step]) if model.has_exog else None
        value = forecast_one_step(model, history, exog_next=row, exog_history=exog_history)
        predictions[step] = value
        history = concatenate(history, TimeSeries(start=history.end.shift(1), values=(value,), name=history.name))
        if exog_history:
            exog_history = [
                concatenate(x, TimeSeries(start=x.end.shift(1), values=(float(v),), name=x.name))
                for x, v in zip(exog_history, row)
            ]
    return predictions


def residuals(model: ArimaModel, series: TimeSeries, exog: Optional[Sequence[TimeSeries]] = None) -> TimeSeries:
    """
    Innovations recovered by filtering ``series`` through the model.

    Returns:
        Residual series starting d + D*M + p + P*M months after ``series``

    Raises:
        HistoryTooShort: If nothing is left after differencing and the AR lags
    """
    exog = _check_exog(model, series, exog)
    ar, _ = _model_polynomials(model)
    nd = model.n_diff
    if len(series) - nd <= ar.size:
        raise HistoryTooShort(
            f"Residuals of '{model.label}' need more than {nd + ar.size} observations, got {len(series)}"
        )
    d, D, M = model.order.d, model.seasonal.D, model.seasonal.M
    X = _differenced_exog(exog, d, D, M, len(series) - nd)
    _, e = _filtered_state(model, series.array, X)
    return series.with_values(e[ar.size:], offset=nd + ar.size)
