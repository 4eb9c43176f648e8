"""
Pydantic schemas for rolling one-step evaluation and model comparison.
"""
import math
from typing import Annotated, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from schemas.arima import ArimaOrder, SeasonalOrder
from schemas.hybrid import HybridConfig
from schemas.svr import SvrConfig


class EvalReport(BaseModel):
    """Predictions against actuals over one test window."""

    model_config = ConfigDict(frozen=True)

    model_label: str = Field(..., description="Suite label, e.g. 'sarimax'")
    months: Tuple[str, ...] = Field(..., description="Test months, YYYY-MM")
    actuals: Tuple[float, ...]
    predictions: Tuple[float, ...]
    per_step_error: Tuple[float, ...] = Field(..., description="actual - predicted per month")
    rmse: float = Field(..., ge=0.0)
    n_fits: int = Field(default=1, ge=0, description="Model estimations performed")
    split_fingerprint: str = Field(default="", description="SHA-256 of the train/test split")

    @model_validator(mode="after")
    def _consistent(self) -> "EvalReport":
        size = len(self.actuals)
        if size < 1:
            raise ValueError("a report needs at least one test month")
        if not (len(self.predictions) == len(self.per_step_error) == len(self.months) == size):
            raise ValueError("months, actuals, predictions and errors must share one length")
        recomputed = math.sqrt(sum(e * e for e in self.per_step_error) / size)
        if not math.isclose(recomputed, self.rmse, rel_tol=1e-12, abs_tol=1e-12):
            raise ValueError(f"rmse {self.rmse} does not match the stored errors ({recomputed})")
        return self


class ArimaSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["arima"] = "arima"
    label: str
    order: ArimaOrder
    seasonal: SeasonalOrder = Field(default_factory=SeasonalOrder)
    use_exog: bool = Field(default=False, description="Regress on the bundle's regressors (SARIMAX)")
    refit: bool = Field(default=True, description="Re-estimate before every test month")


class SvrSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["svr"] = "svr"
    label: str
    config: SvrConfig = Field(default_factory=SvrConfig)
    lags: int = Field(default=3, ge=1)
    refit: bool = False


class HybridSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["hybrid"] = "hybrid"
    label: str
    config: HybridConfig = Field(default_factory=HybridConfig)
    use_exog: bool = Field(default=True, description="Feed the bundle's regressors as lagged inputs")
    refit: bool = False


ModelSpec = Annotated[Union[ArimaSpec, SvrSpec, HybridSpec], Field(discriminator="kind")]


class ComparisonTable(BaseModel):
    """Reports of one compare run, best RMSE first."""

    model_config = ConfigDict(frozen=True)

    reports: Tuple[EvalReport, ...]
    n_test: int = Field(..., ge=1)
    split_fingerprint: str

    def labels(self) -> List[str]:
        return [report.model_label for report in self.reports]

    def report(self, label: str) -> Optional[EvalReport]:
        return next((r for r in self.reports if r.model_label == label), None)
