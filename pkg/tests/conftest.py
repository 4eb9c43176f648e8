"""
Shared fixtures: seeded series with known structure.
"""
import numpy as np
import pytest

from schemas.series import MonthStamp, TimeSeries
from services.dataset_service import synth_dataset

START = MonthStamp(year=2010, month=1)


def make_series(values, name: str = "series", start: MonthStamp = START) -> TimeSeries:
    return TimeSeries.from_array(values, start=start, name=name)


def simulate_ar(phi, n: int, seed: int, sigma: float = 1.0, burn: int = 200) -> np.ndarray:
    """y_t = sum phi_i y_{t-i} + e_t after a burn-in."""
    rng = np.random.default_rng(seed)
    p = len(phi)
    e = sigma * rng.standard_normal(n + burn)
    y = np.zeros(n + burn)
    for t in range(p, n + burn):
        y[t] = sum(phi[i] * y[t - 1 - i] for i in range(p)) + e[t]
    return y[burn:]


@pytest.fixture(autouse=True)
def _clean_environment(monkeypatch):
    """Environment overrides from the developer's shell must not leak into tests."""
    for var in ("FORECAST_DATA_DIR", "FORECAST_OUTPUT_DIR", "FORECAST_SEED", "FORECAST_N_TEST", "FORECAST_WORKERS"):
        monkeypatch.delenv(var, raising=False)


@pytest.fixture
def white_noise():
    rng = np.random.default_rng(42)
    return make_series(rng.standard_normal(5000), name="white_noise")


@pytest.fixture
def short_white_noise():
    rng = np.random.default_rng(42)
    return make_series(rng.standard_normal(500), name="white_noise")


@pytest.fixture
def random_walk():
    """Random walk with drift 0.5 per month."""
    rng = np.random.default_rng(42)
    return make_series(np.cumsum(0.5 + rng.standard_normal(500)), name="random_walk")


@pytest.fixture
def ar1_series():
    return make_series(simulate_ar([0.7], 2000, seed=1), name="ar1")


@pytest.fixture
def ar3_series():
    return make_series(simulate_ar([0.5, -0.2, 0.1], 2000, seed=2), name="ar3")


@pytest.fixture(scope="session")
def synthetic_bundle():
    """Default synthetic visitors and search index, seed 7, 168 months."""
    return synth_dataset(7)


@pytest.fixture
def seasonal_trend_series():
    """Integer series: linear trend plus a fixed 12-month pattern, 96 months."""
    pattern = np.array([-30, -25, -10, 0, 10, 25, 60, 55, 15, -5, -20, -25])
    t = np.arange(96)
    return make_series(1000 + 3 * t + pattern[t % 12], name="visitors")
