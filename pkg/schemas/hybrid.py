"""
Pydantic schemas for the additive hybrid model: trend + seasonality +
autoregressive network + lagged-regressor networks + known-future regressors.
"""
from typing import Dict, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from schemas.series import MonthStamp


class HybridConfig(BaseModel):
    """Training configuration; defaults follow the monthly setting."""

    model_config = ConfigDict(frozen=True)

    trend: bool = Field(default=True, description="Piecewise-linear trend component")
    n_changepoints: int = Field(default=10, ge=0)
    changepoint_range: float = Field(default=0.8, gt=0.0, le=1.0, description="Share of the span holding changepoints")
    seasonality: bool = Field(default=True, description="Fourier seasonality component")
    season_period: float = Field(default=12.0, gt=0.0, description="Period l in observations")
    season_terms: int = Field(default=3, ge=0, description="Fourier order m")
    ar_lags: int = Field(default=0, ge=0, description="Autoregressive inputs p")
    reg_lags: int = Field(default=0, ge=0, description="Past values per lagged regressor (lags 1..reg_lags)")
    hidden_layers: Tuple[int, ...] = Field(default=(), description="Hidden widths of the AR network; empty = linear")
    reg_hidden_layers: Optional[Tuple[int, ...]] = Field(
        default=None, description="Hidden widths of each regressor network; None = hidden_layers"
    )
    learning_rate: float = Field(default=0.003, gt=0.0)
    epochs: int = Field(default=500, ge=1)
    batch_size: int = Field(default=32, ge=1)
    huber_delta: float = Field(default=0.3, gt=0.0)
    ar_sparsity: float = Field(default=0.0, ge=0.0, description="L1 weight on the AR input weights")
    weight_decay: float = Field(default=1e-4, ge=0.0, description="Decoupled weight decay")
    seed: int = Field(default=0)

    @model_validator(mode="after")
    def _check(self) -> "HybridConfig":
        if self.seasonality and self.season_terms < 1:
            raise ValueError("season_terms must be at least 1 when seasonality is enabled")
        if any(width < 1 for width in self.hidden_layers + (self.reg_hidden_layers or ())):
            raise ValueError("hidden layer widths must be positive")
        return self

    @property
    def regressor_layers(self) -> Tuple[int, ...]:
        return self.hidden_layers if self.reg_hidden_layers is None else self.reg_hidden_layers


class DenseLayer(BaseModel):
    """Affine layer h W + b with W stored input-major (rows = inputs)."""

    model_config = ConfigDict(frozen=True)

    weights: Tuple[Tuple[float, ...], ...]
    bias: Tuple[float, ...]

    @model_validator(mode="after")
    def _shape(self) -> "DenseLayer":
        if any(len(row) != len(self.bias) for row in self.weights):
            raise ValueError("every weight row must have one entry per output")
        return self

    @property
    def n_inputs(self) -> int:
        return len(self.weights)

    @property
    def n_outputs(self) -> int:
        return len(self.bias)


def _check_chain(layers: Tuple[DenseLayer, ...], n_inputs: int, what: str) -> None:
    if not layers:
        return
    expected = n_inputs
    for index, layer in enumerate(layers):
        if layer.n_inputs != expected:
            raise ValueError(f"{what} layer {index} expects {layer.n_inputs} inputs, chain provides {expected}")
        expected = layer.n_outputs
    if expected != 1:
        raise ValueError(f"{what} network must end in a single output, got {expected}")


class LaggedNet(BaseModel):
    """Network over the last ``lags`` values of one regressor."""

    model_config = ConfigDict(frozen=True)

    name: str
    lags: int = Field(..., ge=1)
    layers: Tuple[DenseLayer, ...]

    @model_validator(mode="after")
    def _chain(self) -> "LaggedNet":
        if not self.layers:
            raise ValueError(f"regressor network '{self.name}' has no layers")
        _check_chain(self.layers, self.lags, f"regressor '{self.name}'")
        return self


class MinMax(BaseModel):
    """Affine normalisation (x - low) / span onto [0, 1] over the training slice."""

    model_config = ConfigDict(frozen=True)

    low: float = 0.0
    span: float = Field(default=1.0, gt=0.0)


class NormStats(BaseModel):
    model_config = ConfigDict(frozen=True)

    target: MinMax = Field(default_factory=MinMax)
    regressors: Tuple[MinMax, ...] = ()
    future: Tuple[MinMax, ...] = ()


class HybridModel(BaseModel):
    """Fitted additive model; all parameters act on normalised targets."""

    model_config = ConfigDict(frozen=True)

    label: str = "hybrid"
    origin: Optional[MonthStamp] = Field(default=None, description="Month at time index t = 0")
    trend_enabled: bool = True
    time_scale: float = Field(default=1.0, gt=0.0, description="Trend uses t / time_scale")
    offset: float = 0.0
    base_rate: float = 0.0
    deltas: Tuple[float, ...] = ()
    changepoint_times: Tuple[float, ...] = ()
    seasonality_enabled: bool = False
    season_period: float = Field(default=12.0, gt=0.0)
    fourier_a: Tuple[float, ...] = ()
    fourier_b: Tuple[float, ...] = ()
    ar_lags: int = Field(default=0, ge=0)
    ar_weights: Tuple[DenseLayer, ...] = ()
    reg_weights: Tuple[LaggedNet, ...] = ()
    future_names: Tuple[str, ...] = ()
    future_weights: Tuple[float, ...] = ()
    norm_stats: NormStats = Field(default_factory=NormStats)
    huber_delta: float = Field(default=0.3, gt=0.0)
    training_loss: Tuple[float, ...] = Field(default=(), description="Mean training loss per epoch")

    @model_validator(mode="after")
    def _shapes(self) -> "HybridModel":
        if len(self.deltas) != len(self.changepoint_times):
            raise ValueError("one slope adjustment per changepoint is required")
        if len(self.fourier_a) != len(self.fourier_b):
            raise ValueError("fourier_a and fourier_b must have the same length")
        if self.ar_lags and not self.ar_weights:
            raise ValueError("ar_lags > 0 requires AR network weights")
        _check_chain(self.ar_weights, self.ar_lags, "AR")
        if len(self.future_weights) != len(self.future_names):
            raise ValueError("one weight per future regressor is required")
        if self.norm_stats.regressors and len(self.norm_stats.regressors) != len(self.reg_weights):
            raise ValueError("normalisation stats do not match the lagged regressors")
        if self.norm_stats.future and len(self.norm_stats.future) != len(self.future_weights):
            raise ValueError("normalisation stats do not match the future regressors")
        return self

    @property
    def season_terms(self) -> int:
        return len(self.fourier_a)

    @property
    def is_linear_ar(self) -> bool:
        return len(self.ar_weights) == 1


class HybridComponents(BaseModel):
    """Decomposition of the fitted values in target units plus lag relevance."""

    model_config = ConfigDict(frozen=True)

    months: Tuple[str, ...]
    actual: Tuple[float, ...]
    fitted: Tuple[float, ...]
    trend: Tuple[float, ...]
    seasonality: Tuple[float, ...]
    ar: Tuple[float, ...]
    regressors: Dict[str, Tuple[float, ...]]
    future: Tuple[float, ...]
    ar_relevance: Tuple[float, ...] = Field(default=(), description="Lag 1 first")
    reg_relevance: Dict[str, Tuple[float, ...]] = Field(default_factory=dict, description="Lag 1 first")
    base_rate: float
    deltas: Tuple[float, ...]
    changepoint_times: Tuple[float, ...]
    fourier_a: Tuple[float, ...]
    fourier_b: Tuple[float, ...]
