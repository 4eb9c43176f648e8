"""
Additive hybrid forecaster.

    y(t) = T(t) + S(t) + A(t) + sum_r L_r(t) + F(t)

T is a piecewise-linear trend, S a Fourier seasonality, A a feed-forward
network over the last ``ar_lags`` targets, L_r one network per lagged
regressor and F a linear map of known-future regressors (events are 0/1
columns of F). Everything acts on min-max normalised data; predictions are
mapped back to target units at the edges.

Training minimises the mean Huber loss with hand-written reverse-mode
gradients and AdamW. Lag vectors always hold lag 1 first.
"""
import logging
import math
import time
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from schemas.hybrid import (
    DenseLayer,
    HybridComponents,
    HybridConfig,
    HybridModel,
    LaggedNet,
    MinMax,
    NormStats,
)
from schemas.series import TimeSeries
from services.errors import (
    DimensionMismatch,
    EmptyInput,
    MisalignedRegressor,
    MissingComponentInput,
    NonConvergence,
    SeasonalityDisabled,
    SeriesTooShort,
    UsageError,
)

logger = logging.getLogger(__name__)

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPSILON = 1e-8

Params = Dict[str, np.ndarray]


class HybridBatch(NamedTuple):
    """Normalised samples, one row per target month."""

    t: np.ndarray
    ar_inputs: np.ndarray
    reg_inputs: Tuple[np.ndarray, ...]
    future: np.ndarray
    targets: np.ndarray

    @property
    def n_samples(self) -> int:
        return len(self.t)

    def take(self, index) -> "HybridBatch":
        return HybridBatch(
            t=self.t[index],
            ar_inputs=self.ar_inputs[index],
            reg_inputs=tuple(x[index] for x in self.reg_inputs),
            future=self.future[index],
            targets=self.targets[index],
        )


class ForwardTrace(NamedTuple):
    """Per-component outputs of one forward pass, normalised units.

    ``*_preactivations`` hold the hidden-layer inputs to the rectifier, which
    is what callers need to stay clear of its kink.
    """

    prediction: np.ndarray
    trend: np.ndarray
    seasonality: np.ndarray
    ar: np.ndarray
    regressors: Tuple[np.ndarray, ...]
    future: np.ndarray
    ar_layer_inputs: List[np.ndarray]
    ar_preactivations: List[np.ndarray]
    reg_layer_inputs: Tuple[List[np.ndarray], ...]
    reg_preactivations: Tuple[List[np.ndarray], ...]


class _Layout(NamedTuple):
    trend_enabled: bool
    time_scale: float
    changepoints: np.ndarray
    seasonality_enabled: bool
    season_period: float
    ar_depth: int
    reg_depths: Tuple[int, ...]
    huber_delta: float


def _layout(model: HybridModel) -> _Layout:
    return _Layout(
        trend_enabled=model.trend_enabled,
        time_scale=model.time_scale,
        changepoints=np.asarray(model.changepoint_times, dtype=float),
        seasonality_enabled=model.seasonality_enabled,
        season_period=model.season_period,
        ar_depth=len(model.ar_weights),
        reg_depths=tuple(len(net.layers) for net in model.reg_weights),
        huber_delta=model.huber_delta,
    )


# ---------------------------------------------------------------------------
# Parameter packing
# ---------------------------------------------------------------------------

def _layer_arrays(prefix: str, layers: Sequence[DenseLayer], params: Params) -> None:
    for index, layer in enumerate(layers):
        params[f"{prefix}_w{index}"] = np.array(layer.weights, dtype=float).reshape(layer.n_inputs, layer.n_outputs)
        params[f"{prefix}_b{index}"] = np.array(layer.bias, dtype=float)


def model_parameters(model: HybridModel) -> Params:
    """Every trainable parameter as a named float array (copies)."""
    params: Params = {
        "offset": np.array([model.offset]),
        "base_rate": np.array([model.base_rate]),
        "deltas": np.array(model.deltas, dtype=float),
        "fourier_a": np.array(model.fourier_a, dtype=float),
        "fourier_b": np.array(model.fourier_b, dtype=float),
        "future_weights": np.array(model.future_weights, dtype=float),
    }
    _layer_arrays("ar", model.ar_weights, params)
    for r, net in enumerate(model.reg_weights):
        _layer_arrays(f"reg{r}", net.layers, params)
    return params


def _floats(values: np.ndarray) -> Tuple[float, ...]:
    return tuple(float(v) for v in values)


def _layers_from(params: Params, prefix: str, depth: int) -> Tuple[DenseLayer, ...]:
    return tuple(
        DenseLayer(
            weights=tuple(_floats(row) for row in params[f"{prefix}_w{index}"]),
            bias=_floats(params[f"{prefix}_b{index}"]),
        )
        for index in range(depth)
    )


def with_parameters(model: HybridModel, params: Params) -> HybridModel:
    """Copy of ``model`` carrying ``params`` (as produced by :func:`model_parameters`)."""
    return model.model_copy(update={
        "offset": float(params["offset"][0]),
        "base_rate": float(params["base_rate"][0]),
        "deltas": _floats(params["deltas"]),
        "fourier_a": _floats(params["fourier_a"]),
        "fourier_b": _floats(params["fourier_b"]),
        "future_weights": _floats(params["future_weights"]),
        "ar_weights": _layers_from(params, "ar", len(model.ar_weights)),
        "reg_weights": tuple(
            net.model_copy(update={"layers": _layers_from(params, f"reg{r}", len(net.layers))})
            for r, net in enumerate(model.reg_weights)
        ),
    })


# ---------------------------------------------------------------------------
# Forward pass
# ---------------------------------------------------------------------------

def _trend_basis(layout: _Layout, t: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Scaled time and the hinge columns (t >= c_j) * (t - c_j) / time_scale."""
    tau = t / layout.time_scale
    cp = layout.changepoints
    hinge = (t[:, None] >= cp[None, :]) * (tau[:, None] - cp[None, :] / layout.time_scale)
    return tau, hinge


def _fourier_basis(layout: _Layout, t: np.ndarray, terms: int) -> Tuple[np.ndarray, np.ndarray]:
    phase = np.mod(t, layout.season_period)
    angle = 2.0 * np.pi * phase[:, None] * np.arange(1, terms + 1)[None, :] / layout.season_period
    return np.cos(angle), np.sin(angle)


def _net_forward(params: Params, prefix: str, depth: int, X: np.ndarray) -> Tuple[np.ndarray, List[np.ndarray], List[np.ndarray]]:
    """Output, per-layer inputs and hidden pre-activations; ReLU hidden, identity output."""
    h = X
    layer_inputs: List[np.ndarray] = []
    preactivations: List[np.ndarray] = []
    for index in range(depth):
        layer_inputs.append(h)
        z = h @ params[f"{prefix}_w{index}"] + params[f"{prefix}_b{index}"]
        if index < depth - 1:
            preactivations.append(z)
            h = np.maximum(z, 0.0)
        else:
            h = z
    return h[:, 0], layer_inputs, preactivations


def _forward(params: Params, layout: _Layout, batch: HybridBatch) -> ForwardTrace:
    n = batch.n_samples
    trend = np.full(n, params["offset"][0])
    if layout.trend_enabled:
        tau, hinge = _trend_basis(layout, batch.t)
        trend = trend + params["base_rate"][0] * tau + hinge @ params["deltas"]

    seasonality = np.zeros(n)
    if layout.seasonality_enabled and params["fourier_a"].size:
        cos, sin = _fourier_basis(layout, batch.t, params["fourier_a"].size)
        seasonality = cos @ params["fourier_a"] + sin @ params["fourier_b"]

    ar = np.zeros(n)
    ar_inputs: List[np.ndarray] = []
    ar_pre: List[np.ndarray] = []
    if layout.ar_depth:
        ar, ar_inputs, ar_pre = _net_forward(params, "ar", layout.ar_depth, batch.ar_inputs)

    regressors, reg_inputs, reg_pre = [], [], []
    for r, depth in enumerate(layout.reg_depths):
        out, inputs, pre = _net_forward(params, f"reg{r}", depth, batch.reg_inputs[r])
        regressors.append(out)
        reg_inputs.append(inputs)
        reg_pre.append(pre)

    future = batch.future @ params["future_weights"] if params["future_weights"].size else np.zeros(n)

    prediction = trend + seasonality + ar + future
    for out in regressors:
        prediction = prediction + out
    return ForwardTrace(
        prediction=prediction,
        trend=trend,
        seasonality=seasonality,
        ar=ar,
        regressors=tuple(regressors),
        future=future,
        ar_layer_inputs=ar_inputs,
        ar_preactivations=ar_pre,
        reg_layer_inputs=tuple(reg_inputs),
        reg_preactivations=tuple(reg_pre),
    )


def forward_trace(model: HybridModel, batch: HybridBatch) -> ForwardTrace:
    return _forward(model_parameters(model), _layout(model), batch)


def trend_eval(model: HybridModel, t: float) -> float:
    """T(t) in normalised units; only the offset when the trend is disabled."""
    params = model_parameters(model)
    layout = _layout(model)
    if not layout.trend_enabled:
        return float(params["offset"][0])
    tau, hinge = _trend_basis(layout, np.array([float(t)]))
    return float(params["offset"][0] + params["base_rate"][0] * tau[0] + hinge[0] @ params["deltas"])


def seasonality_eval(model: HybridModel, t: float) -> float:
    if not model.seasonality_enabled:
        raise SeasonalityDisabled(f"Model '{model.label}' has no seasonality component")
    if not model.fourier_a:
        return 0.0
    cos, sin = _fourier_basis(_layout(model), np.array([float(t)]), model.season_terms)
    return float(cos[0] @ np.asarray(model.fourier_a) + sin[0] @ np.asarray(model.fourier_b))


def ar_forward(model: HybridModel, lags: Sequence[float]) -> float:
    """AR network output for normalised lags (lag 1 first)."""
    lags = np.asarray(lags, dtype=float)
    if not model.ar_lags or lags.shape != (model.ar_lags,):
        raise DimensionMismatch(f"Model '{model.label}' takes {model.ar_lags} AR lags, got {lags.size}")
    out, _, _ = _net_forward(model_parameters(model), "ar", len(model.ar_weights), lags[None, :])
    return float(out[0])


def huber_loss(residual: float, delta: float) -> float:
    r = abs(residual)
    if r <= delta:
        return 0.5 * r * r
    return delta * (r - 0.5 * delta)


def _huber(residuals: np.ndarray, delta: float) -> np.ndarray:
    r = np.abs(residuals)
    return np.where(r <= delta, 0.5 * r * r, delta * (r - 0.5 * delta))


def _normalise(values: np.ndarray, stats: Optional[MinMax]) -> np.ndarray:
    if stats is None:
        return np.asarray(values, dtype=float)
    return (np.asarray(values, dtype=float) - stats.low) / stats.span


def _denormalise(model: HybridModel, values: np.ndarray) -> np.ndarray:
    target = model.norm_stats.target
    return target.low + target.span * values


def _stats(stats: Tuple[MinMax, ...], index: int) -> Optional[MinMax]:
    return stats[index] if stats else None


def model_forward(
    model: HybridModel,
    t: float,
    lags: Optional[Sequence[float]] = None,
    reg_lags: Optional[Sequence[Sequence[float]]] = None,
    future_vals: Optional[Sequence[float]] = None,
) -> float:
    """
    Prediction in target units from raw inputs; lag vectors hold lag 1 first.

    Args:
        model: Fitted model
        t: Months since the model origin
        lags: Last ``ar_lags`` target values
        reg_lags: One lag vector per lagged regressor
        future_vals: Known values of each future regressor at ``t``

    Returns:
        Sum of every enabled component, denormalised

    Raises:
        MissingComponentInput: If an enabled component's inputs are absent
        DimensionMismatch: If a lag vector has the wrong length
    """
    norm = model.norm_stats
    ar_inputs = np.zeros((1, 0))
    if model.ar_lags:
        if lags is None:
            raise MissingComponentInput(f"Model '{model.label}' needs {model.ar_lags} AR lags")
        if len(lags) != model.ar_lags:
            raise DimensionMismatch(f"Model '{model.label}' takes {model.ar_lags} AR lags, got {len(lags)}")
        ar_inputs = _normalise(lags, norm.target)[None, :]

    reg_inputs = []
    if model.reg_weights:
        if reg_lags is None or len(reg_lags) != len(model.reg_weights):
            raise MissingComponentInput(f"Model '{model.label}' needs lags for {len(model.reg_weights)} regressors")
        for r, (net, values) in enumerate(zip(model.reg_weights, reg_lags)):
            if len(values) != net.lags:
                raise DimensionMismatch(f"Regressor '{net.name}' takes {net.lags} lags, got {len(values)}")
            reg_inputs.append(_normalise(values, _stats(norm.regressors, r))[None, :])

    future = np.zeros((1, 0))
    if model.future_weights:
        if future_vals is None or len(future_vals) != len(model.future_weights):
            raise MissingComponentInput(f"Model '{model.label}' needs {len(model.future_weights)} future values")
        future = np.array([
            _normalise([value], _stats(norm.future, j))[0] for j, value in enumerate(future_vals)
        ])[None, :]

    batch = HybridBatch(
        t=np.array([float(t)]),
        ar_inputs=ar_inputs,
        reg_inputs=tuple(reg_inputs),
        future=future,
        targets=np.zeros(1),
    )
    trace = _forward(model_parameters(model), _layout(model), batch)
    return float(_denormalise(model, trace.prediction)[0])


# ---------------------------------------------------------------------------
# Loss and gradients
# ---------------------------------------------------------------------------

def _net_backward(params: Params, prefix: str, depth: int, layer_inputs: List[np.ndarray],
                  preactivations: List[np.ndarray], upstream: np.ndarray, grads: Params) -> np.ndarray:
    """Store weight gradients for dL/d(output) = ``upstream``; returns dL/d(input)."""
    gz = upstream[:, None]
    g_input = gz
    for index in reversed(range(depth)):
        grads[f"{prefix}_w{index}"] = layer_inputs[index].T @ gz
        grads[f"{prefix}_b{index}"] = gz.sum(axis=0)
        g_input = gz @ params[f"{prefix}_w{index}"].T
        if index > 0:
            gz = g_input * (preactivations[index - 1] > 0.0)
    return g_input


def _loss_and_gradients(params: Params, layout: _Layout, batch: HybridBatch,
                        ar_sparsity: float = 0.0) -> Tuple[float, Params]:
    if batch.n_samples == 0:
        raise EmptyInput("Gradient batch is empty")
    trace = _forward(params, layout, batch)
    residual = trace.prediction - batch.targets
    delta = layout.huber_delta
    loss = float(np.mean(_huber(residual, delta)))
    g = np.clip(residual, -delta, delta) / batch.n_samples

    grads: Params = {name: np.zeros_like(value) for name, value in params.items()}
    grads["offset"] = np.array([g.sum()])
    if layout.trend_enabled:
        tau, hinge = _trend_basis(layout, batch.t)
        grads["base_rate"] = np.array([g @ tau])
        grads["deltas"] = hinge.T @ g
    if layout.seasonality_enabled and params["fourier_a"].size:
        cos, sin = _fourier_basis(layout, batch.t, params["fourier_a"].size)
        grads["fourier_a"] = cos.T @ g
        grads["fourier_b"] = sin.T @ g
    if layout.ar_depth:
        _net_backward(params, "ar", layout.ar_depth, trace.ar_layer_inputs, trace.ar_preactivations, g, grads)
    for r, depth in enumerate(layout.reg_depths):
        _net_backward(params, f"reg{r}", depth, trace.reg_layer_inputs[r], trace.reg_preactivations[r], g, grads)
    if params["future_weights"].size:
        grads["future_weights"] = batch.future.T @ g

    if ar_sparsity and layout.ar_depth:
        weights = params["ar_w0"]
        loss += ar_sparsity * float(np.abs(weights).sum())
        grads["ar_w0"] = grads["ar_w0"] + ar_sparsity * np.sign(weights)
    return loss, grads


def batch_loss(model: HybridModel, batch: HybridBatch) -> float:
    """Mean Huber loss of the model on a normalised batch."""
    loss, _ = _loss_and_gradients(model_parameters(model), _layout(model), batch)
    return loss


def gradients(model: HybridModel, batch: HybridBatch) -> Params:
    """Analytic gradient of the mean Huber loss, keyed like :func:`model_parameters`."""
    _, grads = _loss_and_gradients(model_parameters(model), _layout(model), batch)
    return grads


class AdamW:
    """Adaptive moments with decoupled weight decay, updating arrays in place."""

    def __init__(self, params: Params, learning_rate: float, weight_decay: float):
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.step_count = 0
        self._m = {name: np.zeros_like(value) for name, value in params.items()}
        self._v = {name: np.zeros_like(value) for name, value in params.items()}

    def step(self, params: Params, grads: Params) -> None:
        self.step_count += 1
        lr = self.learning_rate
        bias1 = 1.0 - ADAM_BETA1 ** self.step_count
        bias2 = 1.0 - ADAM_BETA2 ** self.step_count
        for name, value in params.items():
            g = grads[name]
            m = self._m[name]
            v = self._v[name]
            m *= ADAM_BETA1
            m += (1.0 - ADAM_BETA1) * g
            v *= ADAM_BETA2
            v += (1.0 - ADAM_BETA2) * g * g
            value *= 1.0 - lr * self.weight_decay
            value -= lr * (m / bias1) / (np.sqrt(v / bias2) + ADAM_EPSILON)


# ---------------------------------------------------------------------------
# Samples
# ---------------------------------------------------------------------------

def _first_target(model: HybridModel) -> int:
    return max([model.ar_lags] + [net.lags for net in model.reg_weights])


def _lag_rows(values: np.ndarray, lags: int, first: int) -> np.ndarray:
    """Row k holds values[first + k - 1], ..., values[first + k - lags]."""
    windows = sliding_window_view(values[:-1], lags)
    return windows[first - lags:, ::-1]


def _check_inputs(model: HybridModel, series: TimeSeries, regressors: Sequence[TimeSeries],
                  future: Sequence[TimeSeries]) -> None:
    if len(regressors) != len(model.reg_weights):
        raise MissingComponentInput(
            f"Model '{model.label}' has {len(model.reg_weights)} lagged regressors, got {len(regressors)}"
        )
    if len(future) != len(model.future_weights):
        raise MissingComponentInput(
            f"Model '{model.label}' has {len(model.future_weights)} future regressors, got {len(future)}"
        )
    for x in list(regressors) + list(future):
        if not x.aligned_with(series):
            raise MisalignedRegressor(
                f"Regressor '{x.name}' ({x.start}, {len(x)} months) does not match "
                f"'{series.name}' ({series.start}, {len(series)} months)"
            )


def build_batch(
    model: HybridModel,
    series: TimeSeries,
    regressors: Sequence[TimeSeries] = (),
    future: Sequence[TimeSeries] = (),
) -> HybridBatch:
    """Every target month that has a full set of lags, normalised with the model's stats."""
    regressors, future = list(regressors), list(future)
    _check_inputs(model, series, regressors, future)
    n = len(series)
    first = _first_target(model)
    if n <= first:
        raise SeriesTooShort(f"Series '{series.name}' has {n} values; the model needs more than {first}")

    norm = model.norm_stats
    y = _normalise(series.array, norm.target)
    shift = model.origin.months_until(series.start) if model.origin is not None else 0
    t = np.arange(first, n, dtype=float) + shift
    ar_inputs = _lag_rows(y, model.ar_lags, first) if model.ar_lags else np.zeros((n - first, 0))
    reg_inputs = tuple(
        _lag_rows(_normalise(x.array, _stats(norm.regressors, r)), net.lags, first)
        for r, (x, net) in enumerate(zip(regressors, model.reg_weights))
    )
    future_matrix = (
        np.column_stack([_normalise(x.array, _stats(norm.future, j))[first:] for j, x in enumerate(future)])
        if future else np.zeros((n - first, 0))
    )
    return HybridBatch(t=t, ar_inputs=ar_inputs, reg_inputs=reg_inputs, future=future_matrix, targets=y[first:])


# ---------------------------------------------------------------------------
# Fitting and forecasting
# ---------------------------------------------------------------------------

def _minmax(values: np.ndarray) -> MinMax:
    span = float(np.ptp(values))
    return MinMax(low=float(np.min(values)), span=span if span > 0.0 else 1.0)


def _zero_net(n_inputs: int, hidden: Sequence[int]) -> Tuple[DenseLayer, ...]:
    widths = [n_inputs, *hidden, 1]
    return tuple(
        DenseLayer(weights=((0.0,) * fan_out,) * fan_in, bias=(0.0,) * fan_out)
        for fan_in, fan_out in zip(widths[:-1], widths[1:])
    )


def _glorot(rng: np.random.Generator, params: Params, prefix: str, n_hidden: int) -> None:
    """Uniform +-sqrt(6 / (fan_in + fan_out)) on hidden layers; the output layer stays zero."""
    for index in range(n_hidden):
        fan_in, fan_out = params[f"{prefix}_w{index}"].shape
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        params[f"{prefix}_w{index}"] = rng.uniform(-limit, limit, size=(fan_in, fan_out))


def fit(
    config: HybridConfig,
    series: TimeSeries,
    lagged_regressors: Sequence[TimeSeries] = (),
    future_regressors: Optional[Sequence[TimeSeries]] = None,
    label: str = "hybrid",
) -> HybridModel:
    """
    Train all components jointly; returns the final-epoch parameters.

    Args:
        config: Components, network widths and optimiser settings
        series: Training target
        lagged_regressors: Regressors entering through their past ``reg_lags`` values
        future_regressors: Regressors whose value in the predicted month is known
        label: Name carried into logs and reports

    Returns:
        HybridModel with normalisation stats from ``series`` and the loss per epoch

    Raises:
        UsageError: If lagged regressors are given with ``reg_lags`` 0
        SeriesTooShort: If fewer than two months have a full set of lags
        MisalignedRegressor: If a regressor covers other months
        NonConvergence: If the training loss stops being finite
    """
    lagged = list(lagged_regressors or [])
    future = list(future_regressors or [])
    if lagged and config.reg_lags < 1:
        raise UsageError("Lagged regressors need reg_lags >= 1")
    n = len(series)
    first = max([config.ar_lags] + ([config.reg_lags] if lagged else []))
    if n <= first + 1:
        raise SeriesTooShort(f"Hybrid fit needs more than {first + 1} observations, '{series.name}' has {n}")

    changepoints = np.zeros(0)
    if config.trend and config.n_changepoints:
        changepoints = np.linspace(0.0, config.changepoint_range * (n - 1), config.n_changepoints + 1)[1:]
    terms = config.season_terms if config.seasonality else 0

    skeleton = HybridModel(
        label=label,
        origin=series.start,
        trend_enabled=config.trend,
        time_scale=float(max(n - 1, 1)),
        deltas=(0.0,) * len(changepoints),
        changepoint_times=_floats(changepoints),
        seasonality_enabled=config.seasonality,
        season_period=config.season_period,
        fourier_a=(0.0,) * terms,
        fourier_b=(0.0,) * terms,
        ar_lags=config.ar_lags,
        ar_weights=_zero_net(config.ar_lags, config.hidden_layers) if config.ar_lags else (),
        reg_weights=tuple(
            LaggedNet(name=x.name, lags=config.reg_lags, layers=_zero_net(config.reg_lags, config.regressor_layers))
            for x in lagged
        ),
        future_names=tuple(x.name for x in future),
        future_weights=(0.0,) * len(future),
        norm_stats=NormStats(
            target=_minmax(series.array),
            regressors=tuple(_minmax(x.array) for x in lagged),
            future=tuple(_minmax(x.array) for x in future),
        ),
        huber_delta=config.huber_delta,
    )
    batch = build_batch(skeleton, series, lagged, future)

    rng = np.random.default_rng(config.seed)
    params = model_parameters(skeleton)
    if config.ar_lags:
        _glorot(rng, params, "ar", len(config.hidden_layers))
    for r in range(len(lagged)):
        _glorot(rng, params, f"reg{r}", len(config.regressor_layers))
    params["offset"][0] = float(np.mean(batch.targets))

    layout = _layout(skeleton)
    optimizer = AdamW(params, config.learning_rate, config.weight_decay)
    history: List[float] = []
    started = time.perf_counter()
    for epoch in range(config.epochs):
        order = rng.permutation(batch.n_samples)
        total = 0.0
        for begin in range(0, batch.n_samples, config.batch_size):
            chunk = batch.take(order[begin:begin + config.batch_size])
            loss, grads = _loss_and_gradients(params, layout, chunk, config.ar_sparsity)
            optimizer.step(params, grads)
            total += loss * chunk.n_samples
        epoch_loss = total / batch.n_samples
        if not math.isfinite(epoch_loss):
            raise NonConvergence(f"Hybrid '{label}' training loss became non-finite at epoch {epoch + 1}")
        history.append(epoch_loss)
        if (epoch + 1) % 100 == 0:
            logger.debug("Hybrid '%s' epoch %d/%d loss=%.6g", label, epoch + 1, config.epochs, epoch_loss)

    model = with_parameters(skeleton, params).model_copy(update={"training_loss": tuple(history)})
    logger.info(
        "Fitted hybrid '%s' on %d samples: %d epochs, final loss=%.6g (%.2fs)",
        label, batch.n_samples, config.epochs, history[-1], time.perf_counter() - started,
    )
    return model


def forecast_rolling(
    model: HybridModel,
    series: TimeSeries,
    regressors: Sequence[TimeSeries] = (),
    n_test: int = 12,
    future: Sequence[TimeSeries] = (),
) -> np.ndarray:
    """
    One-step predictions for the last ``n_test`` months from observed lags, target units.

    Raises:
        SeriesTooShort: If fewer than ``n_test`` months have a full set of lags
    """
    batch = build_batch(model, series, regressors, future)
    if n_test < 1 or batch.n_samples < n_test:
        raise SeriesTooShort(
            f"Series '{series.name}' yields {batch.n_samples} predictable months, {n_test} requested"
        )
    rows = batch.take(slice(batch.n_samples - n_test, None))
    trace = _forward(model_parameters(model), _layout(model), rows)
    return _denormalise(model, trace.prediction)


def _input_relevance(params: Params, prefix: str, depth: int, inputs: np.ndarray) -> Tuple[float, ...]:
    """Linear network: its weights. Deep network: mean |d output / d input| over ``inputs``."""
    if depth == 1:
        return _floats(params[f"{prefix}_w0"][:, 0])
    _, layer_inputs, preactivations = _net_forward(params, prefix, depth, inputs)
    scratch: Params = {}
    g_input = _net_backward(params, prefix, depth, layer_inputs, preactivations, np.ones(len(inputs)), scratch)
    return _floats(np.mean(np.abs(g_input), axis=0))


def components(
    model: HybridModel,
    series: TimeSeries,
    regressors: Sequence[TimeSeries] = (),
    future: Sequence[TimeSeries] = (),
) -> HybridComponents:
    """
    Per-component series in target units; their sum is the fitted series.

    Args:
        model: Fitted model
        series: Target covering the months to decompose
        regressors: Lagged regressors aligned with ``series``
        future: Future regressors aligned with ``series``

    Returns:
        HybridComponents for every month with a full set of lags, plus the
        per-lag relevance of the AR and regressor networks
    """
    batch = build_batch(model, series, regressors, future)
    params = model_parameters(model)
    layout = _layout(model)
    trace = _forward(params, layout, batch)
    span = model.norm_stats.target.span
    first = len(series) - batch.n_samples

    ar_relevance: Tuple[float, ...] = ()
    if layout.ar_depth:
        ar_relevance = _input_relevance(params, "ar", layout.ar_depth, batch.ar_inputs)
    reg_relevance = {
        net.name: _input_relevance(params, f"reg{r}", depth, batch.reg_inputs[r])
        for r, (net, depth) in enumerate(zip(model.reg_weights, layout.reg_depths))
    }

    return HybridComponents(
        months=tuple(str(m) for m in series.months()[first:]),
        actual=series.values[first:],
        fitted=_floats(_denormalise(model, trace.prediction)),
        trend=_floats(_denormalise(model, trace.trend)),
        seasonality=_floats(span * trace.seasonality),
        ar=_floats(span * trace.ar),
        regressors={net.name: _floats(span * out) for net, out in zip(model.reg_weights, trace.regressors)},
        future=_floats(span * trace.future),
        ar_relevance=ar_relevance,
        reg_relevance=reg_relevance,
        base_rate=model.base_rate,
        deltas=model.deltas,
        changepoint_times=model.changepoint_times,
        fourier_a=model.fourier_a,
        fourier_b=model.fourier_b,
    )
