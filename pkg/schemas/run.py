"""
Pydantic schemas for run configuration, datasets and the synthetic generator.
"""
from pathlib import Path
from typing import Dict, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from schemas.arima import ArimaModel, ArimaOrder, SeasonalOrder
from schemas.hybrid import HybridModel
from schemas.series import TimeSeries
from schemas.svr import SvrModel

SUITE_LABELS = ("arima", "sarima", "sarimax", "svr", "hybrid")


def _comma_list(value):
    if isinstance(value, str):
        return tuple(part.strip() for part in value.split(",") if part.strip())
    return value


class RunConfig(BaseModel):
    """Resolved settings of one command invocation (flag > file > env > default)."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    data_dir: str = Field(default="data", description="Directory holding the input CSV files")
    target: str = Field(default="visitors.csv", description="Target series CSV, relative to data_dir")
    regressor: Optional[str] = Field(default="google_trend.csv", description="Regressor CSV, relative to data_dir")
    out: str = Field(default="output", description="Output directory")
    seed: int = Field(default=7)
    months: int = Field(default=168, ge=36, description="Synthetic series length")
    n_test: int = Field(default=12, ge=1, description="Test months at the end of the series")
    models: Tuple[str, ...] = Field(default=SUITE_LABELS, min_length=1)
    refit: Optional[bool] = Field(default=None, description="Override every model's refit flag")
    workers: int = Field(default=1, ge=1, description="Concurrent evaluations in compare")

    arima_order: ArimaOrder = Field(default_factory=lambda: ArimaOrder(p=3, d=1, q=0))
    seasonal_order: SeasonalOrder = Field(default_factory=lambda: SeasonalOrder(P=1, D=1, Q=0, M=12))

    svr_c: float = Field(default=10.0, gt=0.0)
    svr_epsilon: float = Field(default=0.05, ge=0.0)
    svr_kernel: Literal["linear", "polynomial", "gaussian"] = "gaussian"
    svr_lags: int = Field(default=3, ge=1)

    hybrid_epochs: int = Field(default=500, ge=1)
    hybrid_learning_rate: float = Field(default=0.003, gt=0.0)
    hybrid_hidden: Tuple[int, ...] = Field(default=(4, 2))
    hybrid_ar_lags: int = Field(default=3, ge=0)
    hybrid_reg_lags: int = Field(default=2, ge=0)
    hybrid_season_terms: int = Field(default=3, ge=1)
    hybrid_batch_size: int = Field(default=32, ge=1)

    model: str = Field(default="sarimax", description="Single suite label for fit/evaluate/forecast")
    horizon: int = Field(default=1, ge=1)
    model_file: Optional[str] = None
    exog_next: Tuple[float, ...] = Field(default=(), description="Future regressor values, one per forecast month")
    max_lag: int = Field(default=24, ge=1)

    @field_validator("models", "hybrid_hidden", "exog_next", mode="before")
    @classmethod
    def _split(cls, value):
        return _comma_list(value)

    @field_validator("arima_order", mode="before")
    @classmethod
    def _arima_order(cls, value):
        return ArimaOrder.parse(value) if isinstance(value, str) else value

    @field_validator("seasonal_order", mode="before")
    @classmethod
    def _seasonal_order(cls, value):
        return SeasonalOrder.parse(value) if isinstance(value, str) else value

    @field_validator("regressor", "model_file", "refit", mode="before")
    @classmethod
    def _blank_is_none(cls, value):
        if isinstance(value, str) and value.strip().lower() in ("", "none"):
            return None
        return value

    @model_validator(mode="after")
    def _labels(self) -> "RunConfig":
        unknown = [label for label in self.models + (self.model,) if label not in SUITE_LABELS]
        if unknown:
            raise ValueError(f"unknown model label(s) {', '.join(unknown)}; expected one of {', '.join(SUITE_LABELS)}")
        return self

    @property
    def target_path(self) -> Path:
        return Path(self.data_dir) / self.target

    @property
    def regressor_path(self) -> Optional[Path]:
        return Path(self.data_dir) / self.regressor if self.regressor else None

    def as_flat(self) -> Dict[str, str]:
        """String form of every key, parseable back into the same config."""
        flat: Dict[str, str] = {}
        for key, value in self.model_dump().items():
            attr = getattr(self, key)
            if isinstance(attr, ArimaOrder):
                text = f"{attr.p},{attr.d},{attr.q}"
            elif isinstance(attr, SeasonalOrder):
                text = f"{attr.P},{attr.D},{attr.Q},{attr.M}"
            elif isinstance(value, (tuple, list)):
                text = ",".join(str(v) for v in value)
            elif value is None:
                text = "none"
            elif isinstance(value, bool):
                text = str(value).lower()
            else:
                text = str(value)
            flat[key] = text
        return flat


class SynthParams(BaseModel):
    """Additive shape of the synthetic visitor series and its search-interest companion.

    target = baseline + trend + seasonal_profile[calendar month] + spike + noise
    """

    model_config = ConfigDict(frozen=True)

    start: str = Field(default="2010-01", description="First month, YYYY-MM")
    baseline: float = Field(default=20000.0, gt=0.0, description="Level at the first month")
    slope: float = Field(default=60.0, ge=0.0, description="Monthly growth before the break")
    steep_slope: float = Field(default=180.0, ge=0.0, description="Monthly growth after the break")
    break_fraction: float = Field(default=0.6, gt=0.0, lt=1.0, description="Position of the slope change")
    seasonal_profile: Tuple[float, ...] = Field(
        default=(-6000.0, -6000.0, -4500.0, -2500.0, -500.0, 4000.0,
                 10500.0, 10500.0, 3500.0, -1500.0, -4000.0, -3500.0),
        min_length=12,
        max_length=12,
        description="Visitors added per calendar month, January first",
    )
    noise: float = Field(default=800.0, ge=0.0, description="Standard deviation of the additive noise, visitors")
    spike_month: Optional[str] = Field(default="2020-07", description="Month lifted to spike_factor times its level")
    spike_factor: float = Field(default=1.4, gt=0.0)
    index_low: float = Field(default=5.0, ge=0.0, le=100.0)
    index_high: float = Field(default=95.0, ge=0.0, le=100.0)
    index_noise: float = Field(default=0.5, ge=0.0, description="Standard deviation of the index noise, points")

    @model_validator(mode="after")
    def _index_range(self) -> "SynthParams":
        if self.index_low >= self.index_high:
            raise ValueError("index_low must be below index_high")
        return self


class DatasetBundle(BaseModel):
    """Target series plus named regressors covering the same months."""

    model_config = ConfigDict(frozen=True)

    target: TimeSeries
    regressors: Dict[str, TimeSeries] = Field(default_factory=dict)
    provenance: str = Field(default="", description="Source paths or generator seed")

    @model_validator(mode="after")
    def _aligned(self) -> "DatasetBundle":
        for name, series in self.regressors.items():
            if not series.aligned_with(self.target):
                raise ValueError(
                    f"regressor '{name}' covers {series.start}..{series.end}, "
                    f"target covers {self.target.start}..{self.target.end}"
                )
        return self

    @property
    def exog(self) -> Tuple[TimeSeries, ...]:
        return tuple(self.regressors.values())


class SavedModel(BaseModel):
    """On-disk form of a fitted model; exactly one of the model fields is set."""

    model_config = ConfigDict(frozen=True)

    label: str
    kind: Literal["arima", "svr", "hybrid"]
    trained_until: str = Field(..., description="Last training month, YYYY-MM")
    regressors: Tuple[str, ...] = Field(default=(), description="Regressor series the model consumes")
    arima: Optional[ArimaModel] = None
    svr: Optional[SvrModel] = None
    hybrid: Optional[HybridModel] = None

    @model_validator(mode="after")
    def _one_model(self) -> "SavedModel":
        if getattr(self, self.kind) is None:
            raise ValueError(f"saved model of kind '{self.kind}' carries no {self.kind} parameters")
        return self

    @property
    def model(self) -> Union[ArimaModel, SvrModel, HybridModel]:
        return getattr(self, self.kind)
