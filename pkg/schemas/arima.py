"""
Pydantic schemas for (S)ARIMA(X) orders and fitted models.
"""
from typing import Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator


class ArimaOrder(BaseModel):
    """Non-seasonal order (p, d, q)."""

    model_config = ConfigDict(frozen=True)

    p: int = Field(..., ge=0, description="Autoregressive order")
    d: int = Field(..., ge=0, description="Differencing degree")
    q: int = Field(..., ge=0, description="Moving-average order")

    @classmethod
    def parse(cls, text: str) -> "ArimaOrder":
        p, d, q = (int(part) for part in text.split(","))
        return cls(p=p, d=d, q=q)

    def __str__(self) -> str:
        return f"({self.p},{self.d},{self.q})"


class SeasonalOrder(BaseModel):
    """Seasonal order (P, D, Q, M); all zero means no seasonal part."""

    model_config = ConfigDict(frozen=True)

    P: int = Field(default=0, ge=0, description="Seasonal autoregressive order")
    D: int = Field(default=0, ge=0, description="Seasonal differencing degree")
    Q: int = Field(default=0, ge=0, description="Seasonal moving-average order")
    M: int = Field(default=12, ge=1, description="Season length in observations")

    @model_validator(mode="after")
    def _season_length(self) -> "SeasonalOrder":
        if (self.P or self.D or self.Q) and self.M < 2:
            raise ValueError("season length M must be at least 2 when a seasonal part is present")
        return self

    @classmethod
    def parse(cls, text: str) -> "SeasonalOrder":
        P, D, Q, M = (int(part) for part in text.split(","))
        return cls(P=P, D=D, Q=Q, M=M)

    @property
    def is_empty(self) -> bool:
        return not (self.P or self.D or self.Q)

    def __str__(self) -> str:
        return f"({self.P},{self.D},{self.Q},{self.M})"


class ArimaModel(BaseModel):
    """Fitted regression-with-SARIMA-errors model.

    On the differenced scale w_t, with v_t = w_t - sum_j exog_beta_j * x~_{j,t}
    (x~ the identically differenced regressors):

        A(L) v_t = intercept + B(L) e_t

    where A and B are the expanded non-seasonal x seasonal lag polynomials.
    """

    model_config = ConfigDict(frozen=True)

    order: ArimaOrder
    seasonal: SeasonalOrder = Field(default_factory=SeasonalOrder)
    phi: Tuple[float, ...] = Field(default=(), description="AR coefficients phi_1..phi_p")
    theta: Tuple[float, ...] = Field(default=(), description="MA coefficients theta_1..theta_q")
    seasonal_phi: Tuple[float, ...] = Field(default=(), description="Seasonal AR coefficients")
    seasonal_theta: Tuple[float, ...] = Field(default=(), description="Seasonal MA coefficients")
    exog_beta: Tuple[float, ...] = Field(default=(), description="One coefficient per regressor")
    intercept: float = Field(default=0.0, description="Constant of the AR recursion (only when d+D=0)")
    sigma2: float = Field(default=0.0, ge=0.0, description="Innovation variance, squared target units")
    pivots: Tuple[float, ...] = Field(default=(), description="Observations dropped by differencing")
    css: float = Field(default=0.0, ge=0.0, description="Conditional sum of squares at the estimate")
    n_residuals: int = Field(default=0, ge=0, description="Effective sample size of the CSS")
    stationarity_warning: bool = Field(default=False, description="An AR root has modulus <= 1.02")
    iterations: int = Field(default=0, ge=0)
    label: str = Field(default="arima")

    @model_validator(mode="after")
    def _lengths(self) -> "ArimaModel":
        expected = {
            "phi": (self.phi, self.order.p),
            "theta": (self.theta, self.order.q),
            "seasonal_phi": (self.seasonal_phi, self.seasonal.P),
            "seasonal_theta": (self.seasonal_theta, self.seasonal.Q),
        }
        for name, (coefs, order) in expected.items():
            if len(coefs) != order:
                raise ValueError(f"{name} has {len(coefs)} coefficients, order requires {order}")
        return self

    @property
    def n_diff(self) -> int:
        return self.order.d + self.seasonal.D * self.seasonal.M

    @property
    def has_exog(self) -> bool:
        return bool(self.exog_beta)
