"""
Series operations shared by every model: differencing, correlation
diagnostics, the unit-root regression, scaling and supervised framing.

All functions are pure; inputs are never modified.
"""
import logging
import math
from typing import Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from schemas.series import AdfResult, SupervisedFrame, TimeSeries
from services.errors import (
    ConstantSeries,
    LagTooLarge,
    LengthMismatch,
    PivotMismatch,
    SeriesTooShort,
    SplitTooLarge,
    UsageError,
)

logger = logging.getLogger(__name__)

ADF_CRITICAL_5PCT = -2.86


def difference_polynomial(d: int, D: int, M: int) -> np.ndarray:
    """Coefficients of (1-L)^d (1-L^M)^D, index k multiplying L^k."""
    poly = np.array([1.0])
    for _ in range(d):
        poly = np.convolve(poly, [1.0, -1.0])
    seasonal = np.zeros(M + 1)
    seasonal[0], seasonal[M] = 1.0, -1.0
    for _ in range(D):
        poly = np.convolve(poly, seasonal)
    return poly


def _check_orders(d: int, D: int, M: int) -> None:
    if d < 0 or D < 0:
        raise UsageError(f"Differencing orders must be non-negative (d={d}, D={D})")
    if M < 1:
        raise UsageError(f"Season length must be positive (M={M})")


def difference_values(values: np.ndarray, d: int, D: int, M: int) -> np.ndarray:
    """Array form of :func:`difference` without length checks."""
    out = np.asarray(values, dtype=float)
    for _ in range(D):
        out = out[M:] - out[:-M]
    for _ in range(d):
        out = out[1:] - out[:-1]
    return out


def difference(series: TimeSeries, d: int, D: int = 0, M: int = 12) -> TimeSeries:
    """
    Apply (1-L)^d (1-L^M)^D; the result starts d + D*M months later.

    Args:
        series: Series to difference
        d: Non-seasonal order
        D: Seasonal order
        M: Season length in months

    Returns:
        Differenced series, or ``series`` itself when d = D = 0

    Raises:
        UsageError: On negative orders or a season length below 1
        SeriesTooShort: If nothing would remain
    """
    _check_orders(d, D, M)
    dropped = d + D * M
    if len(series) <= dropped:
        raise SeriesTooShort(
            f"Series '{series.name}' has {len(series)} values; differencing needs more than {dropped}"
        )
    if dropped == 0:
        return series
    return series.with_values(difference_values(series.array, d, D, M), offset=dropped)


def undifference(
    diffed: TimeSeries,
    pivots: Sequence[float],
    d: int,
    D: int = 0,
    M: int = 12,
) -> TimeSeries:
    """
    Invert :func:`difference` given the d + D*M observations it dropped.

    Integer inputs come back exactly.

    Raises:
        PivotMismatch: If ``pivots`` does not hold d + D*M values
    """
    _check_orders(d, D, M)
    dropped = d + D * M
    pivots = [float(p) for p in pivots]
    if len(pivots) != dropped:
        raise PivotMismatch(f"Expected {dropped} pivot values, got {len(pivots)}")
    if dropped == 0:
        return diffed

    poly = difference_polynomial(d, D, M)
    out = pivots + [0.0] * len(diffed)
    for i, w in enumerate(diffed.values):
        t = dropped + i
        # y_t = w_t - sum_{k>=1} poly[k] * y_{t-k}; poly entries are small integers
        acc = w
        for k in range(1, dropped + 1):
            if poly[k] != 0.0:
                acc -= poly[k] * out[t - k]
        out[t] = acc
    return diffed.with_values(out, offset=-dropped)


def _centered(series: TimeSeries) -> np.ndarray:
    values = series.array
    centered = values - values.mean()
    if not np.any(centered):
        raise ConstantSeries(f"Series '{series.name}' is constant")
    return centered


def autocovariance(centered: np.ndarray, max_lag: int) -> np.ndarray:
    """Biased (divide-by-n) autocovariances for lags 0..max_lag."""
    n = len(centered)
    return np.array([centered[k:] @ centered[: n - k] / n for k in range(max_lag + 1)])


def acf(series: TimeSeries, max_lag: int) -> np.ndarray:
    """
    Sample autocorrelations for lags 0..max_lag.

    Args:
        series: Series to correlate with itself
        max_lag: Largest lag, below the series length

    Returns:
        Array of max_lag + 1 values with entry 0 equal to 1.0

    Raises:
        LagTooLarge: If ``max_lag`` reaches the series length
        ConstantSeries: If the series has no variance
    """
    if max_lag < 1:
        raise UsageError(f"max_lag must be positive, got {max_lag}")
    if max_lag >= len(series):
        raise LagTooLarge(f"max_lag {max_lag} must be below the series length {len(series)}")
    gamma = autocovariance(_centered(series), max_lag)
    return gamma / gamma[0]


def pacf(series: TimeSeries, max_lag: int) -> np.ndarray:
    """Partial autocorrelations via the Durbin-Levinson recursion on the acf.

    Entry 0 is 1.0 by convention, entry k the last coefficient of the
    order-k autoregression fitted to the autocorrelations.

    Raises:
        LagTooLarge: If ``max_lag`` is not below half the series length
        ConstantSeries: If the series has no variance
    """
    if max_lag < 1:
        raise UsageError(f"max_lag must be positive, got {max_lag}")
    if max_lag >= len(series) / 2:
        raise LagTooLarge(f"max_lag {max_lag} must be below half the series length {len(series)}")
    rho = acf(series, max_lag)

    out = np.zeros(max_lag + 1)
    out[0] = 1.0
    phi = np.zeros(max_lag + 1)
    phi[1] = rho[1]
    out[1] = rho[1]
    v = 1.0 - rho[1] ** 2
    for k in range(2, max_lag + 1):
        if v <= 0.0:
            break
        num = rho[k] - phi[1:k] @ rho[k - 1:0:-1]
        phi_kk = num / v
        phi[1:k] = phi[1:k] - phi_kk * phi[k - 1:0:-1]
        phi[k] = phi_kk
        out[k] = phi_kk
        v *= 1.0 - phi_kk ** 2
    return out


def cross_correlation(a: TimeSeries, b: TimeSeries, max_lag: int) -> np.ndarray:
    """corr(a_t, b_{t-k}) for k = 0..max_lag, biased normalisation."""
    if not a.aligned_with(b):
        raise LengthMismatch(f"Series '{a.name}' and '{b.name}' do not cover the same months")
    if max_lag >= len(a):
        raise LagTooLarge(f"max_lag {max_lag} must be below the series length {len(a)}")
    x, y = _centered(a), _centered(b)
    n = len(x)
    scale = math.sqrt((x @ x) * (y @ y))
    return np.array([x[k:] @ y[: n - k] / scale for k in range(max_lag + 1)])


def adf_statistic(series: TimeSeries) -> AdfResult:
    """Augmented Dickey-Fuller test, constant-only regression.

    Regresses dy_t on a constant, y_{t-1} and k lagged differences with
    k = floor(cbrt(n - 1)); the t-statistic of the y_{t-1} coefficient is
    compared with the 5% asymptotic critical value -2.86.

    Args:
        series: Levels or differences to test

    Returns:
        AdfResult with the statistic, k and the rejection flag

    Raises:
        SeriesTooShort: Below 25 observations
        ConstantSeries: If the series has no variance
    """
    n = len(series)
    if n < 25:
        raise SeriesTooShort(f"ADF needs at least 25 observations, got {n}")
    y = series.array
    if np.ptp(y) == 0.0:
        raise ConstantSeries(f"Series '{series.name}' is constant")

    k = int(math.floor((n - 1) ** (1.0 / 3.0) + 1e-12))
    dy = np.diff(y)
    rows = len(dy) - k
    columns = [np.ones(rows), y[k:-1]]
    for i in range(1, k + 1):
        columns.append(dy[k - i: len(dy) - i])
    X = np.column_stack(columns)
    target = dy[k:]

    beta, _, rank, _ = np.linalg.lstsq(X, target, rcond=None)
    if rank < X.shape[1]:
        raise ConstantSeries(f"Series '{series.name}' leaves the unit-root regression singular")
    resid = target - X @ beta
    dof = rows - X.shape[1]
    sigma2 = resid @ resid / dof
    cov = sigma2 * np.linalg.inv(X.T @ X)
    stat = float(beta[1] / math.sqrt(cov[1, 1]))
    logger.debug("ADF on '%s': stat=%.4f k=%d n=%d", series.name, stat, k, rows)
    return AdfResult(
        statistic=stat,
        lags=k,
        n_obs=rows,
        critical_value=ADF_CRITICAL_5PCT,
        reject_unit_root=stat < ADF_CRITICAL_5PCT,
    )


def scale_to_range(series: TimeSeries, lo: float = 0.0, hi: float = 100.0) -> TimeSeries:
    """
    Affine map sending the minimum to ``lo`` and the maximum to ``hi``.

    Raises:
        UsageError: Unless lo < hi
        ConstantSeries: If there is no range to map
    """
    if not lo < hi:
        raise UsageError(f"Scaling bounds must satisfy lo < hi (got {lo}, {hi})")
    values = series.array
    vmin, vmax = values.min(), values.max()
    if vmax == vmin:
        raise ConstantSeries(f"Series '{series.name}' is constant and cannot be scaled")
    scaled = lo + (values - vmin) * (hi - lo) / (vmax - vmin)
    scaled[values == vmin] = lo
    scaled[values == vmax] = hi
    return series.with_values(scaled)


def make_supervised(series: TimeSeries, p: int) -> SupervisedFrame:
    """
    Rows (y_{t-p}, ..., y_{t-1}) with target y_t.

    Args:
        series: Series to frame
        p: Lags per row

    Returns:
        SupervisedFrame of len(series) - p rows, oldest lag left

    Raises:
        SeriesTooShort: If the series has p values or fewer
    """
    if p < 1:
        raise UsageError(f"Lag count must be positive, got {p}")
    if len(series) <= p:
        raise SeriesTooShort(f"Series '{series.name}' has {len(series)} values; {p} lags need more")
    values = series.array
    windows = sliding_window_view(values[:-1], p)
    return SupervisedFrame(
        inputs=tuple(tuple(float(v) for v in row) for row in windows),
        targets=tuple(float(v) for v in values[p:]),
    )


def split_train_test(series: TimeSeries, n_test: int) -> Tuple[TimeSeries, TimeSeries]:
    """
    Hold out the last ``n_test`` observations.

    Returns:
        (train, test) slices with consistent month stamps

    Raises:
        UsageError: If ``n_test`` is not positive
        SplitTooLarge: If no training month would remain
    """
    if n_test < 1:
        raise UsageError(f"n_test must be positive, got {n_test}")
    if n_test >= len(series):
        raise SplitTooLarge(
            f"SplitTooLarge: n_test={n_test} leaves no training data in a series of length {len(series)}"
        )
    cut = len(series) - n_test
    return series.slice(0, cut), series.slice(cut, len(series))


def concatenate(head: TimeSeries, tail: TimeSeries) -> TimeSeries:
    """Join two adjacent series; ``tail`` must start the month after ``head`` ends."""
    if head.end.shift(1) != tail.start:
        raise LengthMismatch(f"Series '{tail.name}' does not continue '{head.name}'")
    return TimeSeries(start=head.start, values=head.values + tail.values, name=head.name)
