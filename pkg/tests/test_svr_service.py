"""
Tests for kernels, the SMO dual solver and rolling SVR forecasts.
"""
import logging

import numpy as np
import pytest
from scipy.optimize import minimize

from schemas.series import SupervisedFrame
from schemas.svr import KernelSpec, SvrConfig, SvrModel
from services import svr_service
from services.dataset_service import synth_dataset
from services.errors import DegenerateFrame, DimensionMismatch, SeriesTooShort
from services.series_service import make_supervised, scale_to_range
from tests.conftest import make_series


@pytest.fixture
def toy_problem():
    """12 samples, 2 features, linear target with noise."""
    rng = np.random.default_rng(21)
    X = rng.uniform(-1.0, 1.0, size=(12, 2))
    y = 0.5 * X[:, 0] - 0.3 * X[:, 1] + 0.2 * rng.standard_normal(12)
    return X, y


def dense_dual_oracle(K: np.ndarray, y: np.ndarray, c: float, eps: float) -> np.ndarray:
    """SLSQP on the 2n-variable dual; returns the optimal deltas."""
    n = len(y)

    def objective(v):
        delta = v[:n] - v[n:]
        return 0.5 * delta @ K @ delta - y @ delta + eps * np.sum(v)

    def gradient(v):
        g = K @ (v[:n] - v[n:]) - y
        return np.concatenate([g + eps, -g + eps])

    result = minimize(
        objective,
        np.zeros(2 * n),
        jac=gradient,
        method="SLSQP",
        bounds=[(0.0, c)] * (2 * n),
        constraints=[{"type": "eq", "fun": lambda v: np.sum(v[:n] - v[n:]), "jac": lambda v: np.r_[np.ones(n), -np.ones(n)]}],
        options={"ftol": 1e-14, "maxiter": 2000},
    )
    return result.x[:n] - result.x[n:]


def primal_objective(deltas: np.ndarray, bias: float, K: np.ndarray, y: np.ndarray, c: float, eps: float) -> float:
    fitted = K @ deltas + bias
    return float(0.5 * deltas @ K @ deltas + c * np.sum(np.maximum(0.0, np.abs(y - fitted) - eps)))


class TestKernels:

    def test_linear(self):
        assert svr_service.kernel_eval(KernelSpec(kind="linear"), [1, 2], [3, 4]) == 11.0

    def test_gaussian_at_zero_distance(self):
        for sigma in (0.1, 1.0, 7.5):
            assert svr_service.kernel_eval(KernelSpec(kind="gaussian", sigma=sigma), [1, -2], [1, -2]) == 1.0

    def test_polynomial(self):
        assert svr_service.kernel_eval(KernelSpec(kind="polynomial", degree=2), [1, 1], [2, 0]) == 4.0

    def test_matrix_agrees_with_pairwise(self, toy_problem):
        X, _ = toy_problem
        spec = KernelSpec(kind="gaussian", sigma=0.8)
        K = svr_service.kernel_matrix(spec, X, X)
        assert K[2, 5] == pytest.approx(svr_service.kernel_eval(spec, X[2], X[5]), rel=1e-12)
        np.testing.assert_allclose(K, K.T)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            svr_service.kernel_eval(KernelSpec(kind="linear"), [1, 2], [1, 2, 3])

    def test_median_heuristic(self):
        X = np.array([[0.0], [1.0], [3.0]])
        # distances 1, 2, 3
        assert svr_service.median_heuristic(X) == 2.0


class TestSolveDual:

    def test_matches_dense_oracle(self, toy_problem):
        X, y = toy_problem
        K = svr_service.kernel_matrix(KernelSpec(kind="linear"), X, X)
        c, eps = 10.0, 0.1
        solution = svr_service.solve_dual(K, y, c, eps, tol=1e-8)
        assert solution.converged
        oracle = dense_dual_oracle(K, y, c, eps)
        optimum = svr_service.dual_objective(oracle, K, y, eps)
        assert svr_service.dual_objective(solution.deltas, K, y, eps) == pytest.approx(optimum, abs=1e-6)
        np.testing.assert_allclose(K @ solution.deltas, K @ oracle, atol=1e-3)
        # zero duality gap certifies the bias as well
        gap = primal_objective(solution.deltas, solution.bias, K, y, c, eps) - optimum
        assert abs(gap) < 1e-4, f"duality gap {gap}"

    def test_equality_constraint_and_box(self, toy_problem):
        X, y = toy_problem
        K = svr_service.kernel_matrix(KernelSpec(kind="gaussian", sigma=1.0), X, X)
        solution = svr_service.solve_dual(K, y, 1.0, 0.05, tol=1e-6)
        assert abs(solution.deltas.sum()) < 1e-9
        assert np.all(np.abs(solution.deltas) <= 1.0 + 1e-12)

    def test_deterministic(self, toy_problem):
        X, y = toy_problem
        K = svr_service.kernel_matrix(KernelSpec(kind="linear"), X, X)
        first = svr_service.solve_dual(K, y, 10.0, 0.1)
        second = svr_service.solve_dual(K, y, 10.0, 0.1)
        np.testing.assert_array_equal(first.deltas, second.deltas)
        assert first.bias == second.bias

    @pytest.mark.parametrize("kernel", [
        KernelSpec(kind="linear"),
        KernelSpec(kind="polynomial", degree=2),
        KernelSpec(kind="gaussian", sigma=1.0),
    ], ids=lambda spec: spec.kind)
    def test_default_cap_reaches_the_optimum(self, kernel):
        c, eps = 10.0, 0.05
        for seed in range(50):
            rng = np.random.default_rng(seed)
            n = int(rng.integers(5, 21))
            X = rng.uniform(-1.0, 1.0, size=(n, 2))
            y = rng.uniform(0.0, 1.0, size=n)
            K = svr_service.kernel_matrix(kernel, X, X)
            solution = svr_service.solve_dual(K, y, c, eps, tol=1e-8)
            assert solution.converged, f"seed {seed} stopped after {solution.iterations} updates"
            assert solution.iterations < svr_service.default_max_iter(n)
            value = svr_service.dual_objective(solution.deltas, K, y, eps)
            optimum = svr_service.dual_objective(dense_dual_oracle(K, y, c, eps), K, y, eps)
            assert value >= optimum - 1e-6 * (1.0 + abs(optimum)), f"seed {seed}"
            gap = primal_objective(solution.deltas, solution.bias, K, y, c, eps) - value
            assert abs(gap) < 1e-4, f"seed {seed}: duality gap {gap}"

    def test_default_cap_scales_with_samples(self):
        assert svr_service.default_max_iter(10) == svr_service.MIN_ITERATIONS
        assert svr_service.default_max_iter(200) == 100 * 200 * 200


class TestFit:

    def test_constant_targets_need_no_support_vectors(self):
        frame = make_supervised(make_series([4.0] * 20), 3)
        for kind in ("linear", "polynomial", "gaussian"):
            model = svr_service.fit(frame, SvrConfig(kernel=KernelSpec(kind=kind)))
            assert model.n_support == 0
            assert svr_service.predict(model, [1.0, 2.0, 3.0]) == pytest.approx(4.0)

    def test_support_coefficients_are_retained_nonzero(self, toy_problem):
        X, y = toy_problem
        frame = SupervisedFrame(inputs=tuple(map(tuple, X)), targets=tuple(y))
        model = svr_service.fit(frame, SvrConfig(c=2.0, epsilon=0.05, kernel=KernelSpec(kind="linear")))
        assert model.n_support > 0
        assert all(0.0 < abs(d) <= 2.0 for d in model.dual_deltas)
        assert abs(sum(model.dual_deltas)) < 1e-9
        assert len(model.support_indices) == model.n_support

    def test_kkt_conditions_hold(self, toy_problem):
        X, y = toy_problem
        frame = SupervisedFrame(inputs=tuple(map(tuple, X)), targets=tuple(y))
        config = SvrConfig(c=5.0, epsilon=0.05, kernel=KernelSpec(kind="gaussian"), tol=1e-5)
        model = svr_service.fit(frame, config)
        assert model.converged
        violations = svr_service.kkt_violations(model, frame)
        assert violations.max() < 1e-4, f"KKT violations: {violations}"

    def test_median_heuristic_is_stored(self, toy_problem):
        X, y = toy_problem
        frame = SupervisedFrame(inputs=tuple(map(tuple, X)), targets=tuple(y))
        model = svr_service.fit(frame, SvrConfig())
        assert model.kernel.sigma is not None and model.kernel.sigma > 0.0

    def test_default_suite_configuration(self):
        train = synth_dataset(7).target.slice(0, 156)
        frame = make_supervised(scale_to_range(train, 0.0, 1.0), 3)
        model = svr_service.fit(frame, SvrConfig(c=10.0, epsilon=0.05, kernel=KernelSpec(kind="gaussian")))
        assert model.converged
        assert 0 < model.n_support <= len(frame)

    def test_degenerate_frame(self):
        frame = SupervisedFrame(inputs=((1.0,),), targets=(2.0,))
        with pytest.raises(DegenerateFrame):
            svr_service.fit(frame)

    def test_wider_tube_keeps_fewer_support_vectors(self, toy_problem):
        X, y = toy_problem
        frame = SupervisedFrame(inputs=tuple(map(tuple, X)), targets=tuple(y))
        counts = [
            svr_service.fit(frame, SvrConfig(c=10.0, epsilon=eps, kernel=KernelSpec(kind="linear"), tol=1e-6)).n_support
            for eps in (0.01, 0.1, 1.0)
        ]
        assert counts[0] > 0
        assert counts == sorted(counts, reverse=True)
        assert counts[2] == 0

    def test_iteration_cap_is_reported(self, toy_problem, caplog):
        X, y = toy_problem
        frame = SupervisedFrame(inputs=tuple(map(tuple, X)), targets=tuple(y))
        config = SvrConfig(kernel=KernelSpec(kind="gaussian"), tol=1e-10, max_passes=1)
        with caplog.at_level(logging.WARNING, logger="services.svr_service"):
            model = svr_service.fit(frame, config, label="capped")
        assert not model.converged
        assert model.iterations == len(frame)
        assert "capped" in caplog.text and "without meeting tol" in caplog.text


class TestPredict:

    def test_empty_support_returns_bias(self):
        model = SvrModel(bias=7.0, kernel=KernelSpec(kind="linear"))
        assert svr_service.predict(model, [1.0, 2.0]) == 7.0
        assert svr_service.predict(model, [-5.0, 0.5]) == 7.0

    def test_single_support_vector(self):
        model = SvrModel(
            support_inputs=((1.0, 2.0),),
            dual_deltas=(1.0,),
            support_indices=(0,),
            kernel=KernelSpec(kind="linear"),
            n_features=2,
        )
        assert svr_service.predict(model, [1.0, 2.0]) == 5.0

    def test_wrong_width(self):
        model = SvrModel(
            support_inputs=((1.0, 2.0),), dual_deltas=(1.0,), support_indices=(0,),
            kernel=KernelSpec(kind="linear"), n_features=2,
        )
        with pytest.raises(DimensionMismatch):
            svr_service.predict(model, [1.0, 2.0, 3.0])


class TestForecastRolling:

    def test_twelve_predictions(self):
        series = synth_dataset(7).target
        predictions = svr_service.forecast_rolling(SvrConfig(), series, 3, 12)
        assert predictions.shape == (12,)
        assert np.all(np.isfinite(predictions))

    def test_constant_series(self):
        predictions = svr_service.forecast_rolling(SvrConfig(), make_series([9.0] * 40), 3, 12)
        np.testing.assert_allclose(predictions, 9.0)

    def test_deterministic(self):
        series = synth_dataset(5).target
        first = svr_service.forecast_rolling(SvrConfig(), series, 3, 12)
        second = svr_service.forecast_rolling(SvrConfig(), series, 3, 12)
        np.testing.assert_array_equal(first, second)

    def test_fitted_model_uses_observed_lags(self):
        series = make_series(np.arange(40, dtype=float) % 7)
        model = svr_service.fit(make_supervised(series.slice(0, 28), 3), SvrConfig(kernel=KernelSpec(kind="linear")))
        predictions = svr_service.forecast_rolling(model, series, 3, 12)
        expected = [svr_service.predict(model, series.values[t - 3:t]) for t in range(28, 40)]
        np.testing.assert_allclose(predictions, expected, rtol=1e-12)

    def test_too_short(self):
        with pytest.raises(SeriesTooShort):
            svr_service.forecast_rolling(SvrConfig(), make_series(range(10)), 3, 7)
