"""
Pydantic schemas for monthly time series and their derived frames.
"""
import math
from typing import List, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

MONTH_FORMAT = "%Y-%m"


class MonthStamp(BaseModel):
    """Year-month stamp; the data is strictly monthly, no day component."""

    model_config = ConfigDict(frozen=True)

    year: int = Field(..., ge=1, le=9999, description="Calendar year")
    month: int = Field(..., ge=1, le=12, description="Calendar month, 1-12")

    @classmethod
    def parse(cls, text: str) -> "MonthStamp":
        """Parse a ``YYYY-MM`` string; raises ValueError on anything else."""
        text = text.strip()
        try:
            period = pd.Period(text, freq="M")
        except (ValueError, TypeError) as e:
            raise ValueError(f"expected YYYY-MM, got {text!r}") from e
        if pd.isna(period) or period.strftime(MONTH_FORMAT) != text:
            raise ValueError(f"expected YYYY-MM, got {text!r}")
        return cls.from_period(period)

    @classmethod
    def from_period(cls, period: pd.Period) -> "MonthStamp":
        return cls(year=period.year, month=period.month)

    def to_period(self) -> pd.Period:
        return pd.Period(year=self.year, month=self.month, freq="M")

    def shift(self, months: int) -> "MonthStamp":
        return MonthStamp.from_period(self.to_period() + months)

    def months_until(self, other: "MonthStamp") -> int:
        return other.to_period().ordinal - self.to_period().ordinal

    def __str__(self) -> str:
        return f"{self.year:04d}-{self.month:02d}"


class TimeSeries(BaseModel):
    """Contiguous monthly observations starting at ``start``."""

    model_config = ConfigDict(frozen=True)

    start: MonthStamp = Field(..., description="Month of the first observation")
    values: Tuple[float, ...] = Field(..., min_length=1, description="Observations, oldest first")
    name: str = Field(default="series", description="Label used in reports")

    @field_validator("values")
    @classmethod
    def _finite(cls, values: Tuple[float, ...]) -> Tuple[float, ...]:
        for index, value in enumerate(values):
            if not math.isfinite(value):
                raise ValueError(f"value at position {index} is not finite: {value}")
        return values

    @classmethod
    def from_array(cls, values: Sequence[float], start: MonthStamp, name: str = "series") -> "TimeSeries":
        return cls(start=start, values=tuple(float(v) for v in np.asarray(values, dtype=float)), name=name)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    @property
    def end(self) -> MonthStamp:
        return self.start.shift(len(self.values) - 1)

    def months(self) -> List[MonthStamp]:
        periods = pd.period_range(self.start.to_period(), periods=len(self.values), freq="M")
        return [MonthStamp.from_period(period) for period in periods]

    def __len__(self) -> int:
        return len(self.values)

    def slice(self, begin: int, end: int) -> "TimeSeries":
        """Positional slice ``[begin, end)`` keeping month stamps consistent."""
        return TimeSeries(start=self.start.shift(begin), values=self.values[begin:end], name=self.name)

    def with_values(self, values: Sequence[float], offset: int = 0) -> "TimeSeries":
        """New series sharing the name, starting ``offset`` months later."""
        return TimeSeries.from_array(values, start=self.start.shift(offset), name=self.name)

    def aligned_with(self, other: "TimeSeries") -> bool:
        return self.start == other.start and len(self) == len(other)


class SupervisedFrame(BaseModel):
    """Lag matrix (oldest lag left) and the next-step targets."""

    model_config = ConfigDict(frozen=True)

    inputs: Tuple[Tuple[float, ...], ...] = Field(..., description="Rows of p lags, oldest to newest")
    targets: Tuple[float, ...] = Field(..., description="Value following each row")

    @model_validator(mode="after")
    def _shapes(self) -> "SupervisedFrame":
        if len(self.inputs) != len(self.targets):
            raise ValueError("inputs and targets must have the same number of rows")
        widths = {len(row) for row in self.inputs}
        if len(widths) > 1:
            raise ValueError("all input rows must have the same number of lags")
        return self

    @property
    def input_matrix(self) -> np.ndarray:
        if not self.inputs:
            return np.zeros((0, 0))
        return np.asarray(self.inputs, dtype=float)

    @property
    def target_vector(self) -> np.ndarray:
        return np.asarray(self.targets, dtype=float)

    @property
    def n_lags(self) -> int:
        return len(self.inputs[0]) if self.inputs else 0

    def __len__(self) -> int:
        return len(self.targets)


class AdfResult(BaseModel):
    """Constant-only Dickey-Fuller regression outcome."""

    model_config = ConfigDict(frozen=True)

    statistic: float = Field(..., description="t-statistic of the lagged level")
    lags: int = Field(..., ge=0, description="Augmenting lag order k")
    n_obs: int = Field(..., description="Observations in the regression")
    critical_value: float = Field(default=-2.86, description="5% critical value")
    reject_unit_root: bool = Field(..., description="True when statistic < critical value")
