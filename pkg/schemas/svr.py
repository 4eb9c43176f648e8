"""
Pydantic schemas for epsilon-insensitive support vector regression.
"""
from typing import Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator


class KernelSpec(BaseModel):
    """Kernel family and its parameters."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["linear", "polynomial", "gaussian"] = Field(default="gaussian")
    degree: int = Field(default=3, ge=1, description="Polynomial degree d")
    sigma: Optional[float] = Field(
        default=None, gt=0.0, description="Gaussian width; None selects the median pairwise distance at fit time"
    )


class SvrConfig(BaseModel):
    """Hyperparameters; ``c`` is the regularisation weight (C, also written gamma)."""

    model_config = ConfigDict(frozen=True)

    c: float = Field(default=10.0, gt=0.0, description="Box constraint on each dual coefficient")
    epsilon: float = Field(default=0.05, ge=0.0, description="Tube half-width on the scaled target")
    kernel: KernelSpec = Field(default_factory=KernelSpec)
    tol: float = Field(default=1e-3, gt=0.0, description="KKT violation tolerance")
    max_passes: Optional[int] = Field(
        default=None, ge=1, description="Passes of n pair updates; None leaves the solver default cap"
    )


class FeatureScaler(BaseModel):
    """Per-feature standardisation (x - mean) / scale."""

    model_config = ConfigDict(frozen=True)

    mean: Tuple[float, ...] = ()
    scale: Tuple[float, ...] = ()

    @model_validator(mode="after")
    def _lengths(self) -> "FeatureScaler":
        if len(self.mean) != len(self.scale):
            raise ValueError("mean and scale must have the same length")
        if any(s <= 0.0 for s in self.scale):
            raise ValueError("scales must be positive")
        return self


class TargetScaler(BaseModel):
    """Affine map of targets to [0, 1]: (y - low) / span."""

    model_config = ConfigDict(frozen=True)

    low: float = 0.0
    span: float = Field(default=1.0, gt=0.0)


class SvrModel(BaseModel):
    """Fitted SVR: f(x) = sum_i delta_i K(x, x_i) + bias on the scaled axes."""

    model_config = ConfigDict(frozen=True)

    support_inputs: Tuple[Tuple[float, ...], ...] = Field(default=(), description="Scaled retained rows")
    dual_deltas: Tuple[float, ...] = Field(default=(), description="lambda_i - lambda_i* per retained row")
    support_indices: Tuple[int, ...] = Field(default=(), description="Training row of each support vector")
    bias: float = Field(default=0.0)
    kernel: KernelSpec = Field(default_factory=KernelSpec)
    input_scaler: FeatureScaler = Field(default_factory=FeatureScaler)
    target_scaler: TargetScaler = Field(default_factory=TargetScaler)
    n_features: int = Field(default=0, ge=0)
    c: float = Field(default=10.0, gt=0.0)
    epsilon: float = Field(default=0.05, ge=0.0)
    tol: float = Field(default=1e-3, gt=0.0)
    converged: bool = Field(default=True)
    iterations: int = Field(default=0, ge=0)
    label: str = Field(default="svr")

    @model_validator(mode="after")
    def _dual(self) -> "SvrModel":
        if len(self.support_inputs) != len(self.dual_deltas):
            raise ValueError("one dual coefficient per support vector is required")
        for delta in self.dual_deltas:
            if delta == 0.0 or abs(delta) > self.c * (1.0 + 1e-12):
                raise ValueError(f"dual coefficient {delta} outside (0, c]")
        if self.input_scaler.mean and len(self.input_scaler.mean) != self.n_features:
            raise ValueError("input scaler does not match the feature count")
        return self

    @property
    def n_support(self) -> int:
        return len(self.dual_deltas)
