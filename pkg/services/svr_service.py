"""
Epsilon-insensitive support vector regression solved in the dual by
sequential minimal optimisation (SMO).

The solver works on the 2n-variable form of the dual: variables 0..n-1 are
the lambda_i (label +1), n..2n-1 the lambda_i* (label -1). Each iteration
takes the maximal KKT violator and pairs it with the index giving the largest
second-order decrease of the objective; ties go to the lowest index.
"""
import logging
import time
from typing import NamedTuple, Optional, Sequence, Union

import numpy as np

from schemas.series import SupervisedFrame, TimeSeries
from schemas.svr import FeatureScaler, KernelSpec, SvrConfig, SvrModel, TargetScaler
from services.errors import DegenerateFrame, DimensionMismatch, SeriesTooShort
from services.series_service import make_supervised

logger = logging.getLogger(__name__)

TAU = 1e-12
MIN_ITERATIONS = 1_000_000


def default_max_iter(n: int) -> int:
    """Pair-update cap when none is given."""
    return max(MIN_ITERATIONS, 100 * n * n)


class DualSolution(NamedTuple):
    deltas: np.ndarray
    bias: float
    iterations: int
    converged: bool


def kernel_eval(spec: KernelSpec, x: Sequence[float], z: Sequence[float]) -> float:
    """K(x, z) for a single pair of vectors."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    if x.shape != z.shape:
        raise DimensionMismatch(f"Kernel arguments differ in dimension: {x.shape} vs {z.shape}")
    if spec.kind == "linear":
        return float(x @ z)
    if spec.kind == "polynomial":
        return float((x @ z) ** spec.degree)
    sigma = spec.sigma if spec.sigma is not None else 1.0
    return float(np.exp(-np.sum((x - z) ** 2) / (2.0 * sigma ** 2)))


def kernel_matrix(spec: KernelSpec, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Gram matrix K[i, j] = K(A_i, B_j)."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.shape[1] != B.shape[1]:
        raise DimensionMismatch(f"Kernel arguments differ in dimension: {A.shape[1]} vs {B.shape[1]}")
    if spec.kind == "linear":
        return A @ B.T
    if spec.kind == "polynomial":
        return (A @ B.T) ** spec.degree
    sigma = spec.sigma if spec.sigma is not None else 1.0
    sq = np.sum((A[:, None, :] - B[None, :, :]) ** 2, axis=2)
    return np.exp(-sq / (2.0 * sigma ** 2))


def median_heuristic(X: np.ndarray) -> float:
    """Median of the positive pairwise distances between rows (1.0 if none)."""
    X = np.asarray(X, dtype=float)
    diffs = np.sqrt(np.sum((X[:, None, :] - X[None, :, :]) ** 2, axis=2))
    upper = diffs[np.triu_indices(len(X), k=1)]
    upper = upper[upper > 0.0]
    return float(np.median(upper)) if upper.size else 1.0


def dual_objective(deltas: np.ndarray, K: np.ndarray, y: np.ndarray, epsilon: float) -> float:
    """Dual objective to maximise: y.delta - eps*|delta|_1 - delta'K delta / 2."""
    deltas = np.asarray(deltas, dtype=float)
    return float(y @ deltas - epsilon * np.sum(np.abs(deltas)) - 0.5 * deltas @ K @ deltas)


def solve_dual(
    K: np.ndarray,
    y: np.ndarray,
    c: float,
    epsilon: float,
    tol: float = 1e-3,
    max_iter: Optional[int] = None,
) -> DualSolution:
    """
    SMO with second-order working-set selection on the epsilon-SVR dual.

    Args:
        K: Precomputed n x n Gram matrix
        y: Targets
        c: Box constraint on each dual variable
        epsilon: Tube half-width
        tol: Stop once the maximal KKT violating pair differs by less than this
        max_iter: Pair updates allowed; None means max(1e6, 100 * n * n)

    Returns:
        DualSolution with deltas = alpha - alpha*, the bias and whether the
        tolerance was met before the cap
    """
    K = np.asarray(K, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(y)
    if max_iter is None:
        max_iter = default_max_iter(n)
    z = np.concatenate([np.ones(n), -np.ones(n)])
    idx = np.concatenate([np.arange(n), np.arange(n)])
    alpha = np.zeros(2 * n)
    G = np.concatenate([epsilon - y, epsilon + y])
    QD = np.diag(K)[idx]

    iterations = 0
    converged = False
    while iterations < max_iter:
        up = ((z > 0) & (alpha < c)) | ((z < 0) & (alpha > 0))
        low = ((z > 0) & (alpha > 0)) | ((z < 0) & (alpha < c))
        if not up.any() or not low.any():
            converged = True
            break
        up_score = np.where(up, -z * G, -np.inf)
        i = int(np.argmax(up_score))
        g_max = up_score[i]
        g_max2 = np.max(np.where(low, z * G, -np.inf))
        if g_max + g_max2 < tol:
            converged = True
            break

        k_row = K[idx[i], idx]
        quad = QD[i] + QD - 2.0 * k_row
        quad = np.where(quad > 0.0, quad, TAU)
        grad_diff = g_max + z * G
        candidates = low & (grad_diff > 0.0)
        if not candidates.any():
            converged = True
            break
        j = int(np.argmin(np.where(candidates, -(grad_diff ** 2) / quad, np.inf)))

        old_i, old_j = alpha[i], alpha[j]
        q_ij = z[i] * z[j] * k_row[j]
        if z[i] != z[j]:
            quad_coef = QD[i] + QD[j] + 2.0 * q_ij
            quad_coef = quad_coef if quad_coef > 0.0 else TAU
            delta = (-G[i] - G[j]) / quad_coef
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0.0:
                if alpha[j] < 0.0:
                    alpha[j], alpha[i] = 0.0, diff
            elif alpha[i] < 0.0:
                alpha[i], alpha[j] = 0.0, -diff
            if diff > 0.0:
                if alpha[i] > c:
                    alpha[i], alpha[j] = c, c - diff
            elif alpha[j] > c:
                alpha[j], alpha[i] = c, c + diff
        else:
            quad_coef = QD[i] + QD[j] - 2.0 * q_ij
            quad_coef = quad_coef if quad_coef > 0.0 else TAU
            delta = (G[i] - G[j]) / quad_coef
            total = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if total > c:
                if alpha[i] > c:
                    alpha[i], alpha[j] = c, total - c
            elif alpha[j] < 0.0:
                alpha[j], alpha[i] = 0.0, total
            if total > c:
                if alpha[j] > c:
                    alpha[j], alpha[i] = c, total - c
            elif alpha[i] < 0.0:
                alpha[i], alpha[j] = 0.0, total

        step_i, step_j = alpha[i] - old_i, alpha[j] - old_j
        G += z[i] * z * k_row * step_i + z[j] * z * K[idx[j], idx] * step_j
        iterations += 1

    return DualSolution(
        deltas=alpha[:n] - alpha[n:],
        bias=_bias(alpha, G, z, c),
        iterations=iterations,
        converged=converged,
    )


def _bias(alpha: np.ndarray, G: np.ndarray, z: np.ndarray, c: float) -> float:
    """Average over free variables, else the midpoint of the feasible interval."""
    yg = z * G
    at_upper = alpha >= c
    at_lower = alpha <= 0.0
    free = ~at_upper & ~at_lower
    if free.any():
        rho = float(np.mean(yg[free]))
    else:
        ub_mask = (at_upper & (z < 0)) | (at_lower & (z > 0))
        lb_mask = (at_upper & (z > 0)) | (at_lower & (z < 0))
        ub = float(np.min(yg[ub_mask])) if ub_mask.any() else np.inf
        lb = float(np.max(yg[lb_mask])) if lb_mask.any() else -np.inf
        rho = (ub + lb) / 2.0
    return -rho


def _resolve_kernel(kernel: KernelSpec, X: np.ndarray) -> KernelSpec:
    if kernel.kind == "gaussian" and kernel.sigma is None:
        return kernel.model_copy(update={"sigma": median_heuristic(X)})
    return kernel


def fit(frame: SupervisedFrame, config: Optional[SvrConfig] = None, label: str = "svr") -> SvrModel:
    """
    Fit on standardised inputs and [0, 1]-scaled targets.

    Args:
        frame: Lag rows and their next-month targets
        config: Box constraint, tube width, kernel and solver limits
        label: Name carried into logs and reports

    Returns:
        SvrModel holding only the rows with a nonzero dual coefficient. A
        solver stopped by the iteration cap still returns its iterate, with
        ``converged`` False and a logged warning.

    Raises:
        DegenerateFrame: If the frame has fewer than 2 rows
    """
    config = config or SvrConfig()
    if len(frame) < 2:
        raise DegenerateFrame(f"SVR needs at least 2 samples, got {len(frame)}")
    started = time.perf_counter()
    X = frame.input_matrix
    y = frame.target_vector

    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0.0] = 1.0
    Xs = (X - mean) / scale
    low = float(y.min())
    span = float(np.ptp(y)) or 1.0
    ys = (y - low) / span

    kernel = _resolve_kernel(config.kernel, Xs)
    K = kernel_matrix(kernel, Xs, Xs)
    n = len(y)
    max_iter = config.max_passes * n if config.max_passes is not None else None
    solution = solve_dual(K, ys, config.c, config.epsilon, config.tol, max_iter=max_iter)
    if not solution.converged:
        logger.warning("SVR '%s' stopped after %d iterations without meeting tol=%g", label, solution.iterations, config.tol)

    keep = solution.deltas != 0.0
    model = SvrModel(
        support_inputs=tuple(tuple(float(v) for v in row) for row in Xs[keep]),
        dual_deltas=tuple(float(v) for v in solution.deltas[keep]),
        support_indices=tuple(int(i) for i in np.flatnonzero(keep)),
        bias=solution.bias,
        kernel=kernel,
        input_scaler=FeatureScaler(mean=tuple(float(v) for v in mean), scale=tuple(float(v) for v in scale)),
        target_scaler=TargetScaler(low=low, span=span),
        n_features=X.shape[1],
        c=config.c,
        epsilon=config.epsilon,
        tol=config.tol,
        converged=solution.converged,
        iterations=solution.iterations,
        label=label,
    )
    logger.info(
        "Fitted SVR '%s' on %d samples: %d support vectors, %d iterations (%.2fs)",
        label, n, model.n_support, solution.iterations, time.perf_counter() - started,
    )
    return model


def _scaled_inputs(model: SvrModel, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    expected = model.n_features or (len(model.support_inputs[0]) if model.support_inputs else X.shape[1])
    if X.shape[1] != expected:
        raise DimensionMismatch(f"SVR '{model.label}' expects {expected} features, got {X.shape[1]}")
    if model.input_scaler.mean:
        X = (X - np.asarray(model.input_scaler.mean)) / np.asarray(model.input_scaler.scale)
    return X


def decision_scaled(model: SvrModel, X: np.ndarray) -> np.ndarray:
    """Decision function on the scaled target axis for already scaled rows."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if not model.dual_deltas:
        return np.full(len(X), model.bias)
    K = kernel_matrix(model.kernel, X, np.asarray(model.support_inputs))
    return K @ np.asarray(model.dual_deltas) + model.bias


def predict_many(model: SvrModel, X: np.ndarray) -> np.ndarray:
    scaled = decision_scaled(model, _scaled_inputs(model, X))
    return model.target_scaler.low + model.target_scaler.span * scaled


def predict(model: SvrModel, x: Sequence[float]) -> float:
    """
    Prediction for one lag vector on the original target scale.

    Raises:
        DimensionMismatch: If ``x`` does not have one entry per training lag
    """
    return float(predict_many(model, np.asarray(x, dtype=float)[None, :])[0])


def kkt_violations(model: SvrModel, frame: SupervisedFrame) -> np.ndarray:
    """Per-sample violation of the epsilon-tube optimality conditions, scaled axis.

    ``frame`` must be the training frame; rows without a support vector carry
    a zero dual coefficient.
    """
    X = _scaled_inputs(model, frame.input_matrix)
    y = (frame.target_vector - model.target_scaler.low) / model.target_scaler.span
    residual = y - decision_scaled(model, X)

    deltas = np.zeros(len(y))
    deltas[list(model.support_indices)] = model.dual_deltas

    eps, c = model.epsilon, model.c
    violations = np.zeros(len(y))
    for t, (r, delta) in enumerate(zip(residual, deltas)):
        if delta == 0.0:
            violations[t] = max(0.0, abs(r) - eps)
        elif delta >= c:
            violations[t] = max(0.0, eps - r)
        elif delta <= -c:
            violations[t] = max(0.0, r + eps)
        elif delta > 0.0:
            violations[t] = abs(r - eps)
        else:
            violations[t] = abs(r + eps)
    return violations


def forecast_rolling(
    model_or_config: Union[SvrModel, SvrConfig],
    series: TimeSeries,
    p: int,
    n_test: int,
) -> np.ndarray:
    """
    One-step predictions for the last ``n_test`` months from observed lags.

    Args:
        model_or_config: A fitted model, or a config fitted once on everything
            before the test window
        series: Full series; the test window is its tail
        p: Lags per input row
        n_test: Months predicted

    Returns:
        Array of ``n_test`` predictions, oldest month first

    Raises:
        SeriesTooShort: If the series cannot supply ``p`` lags before the window
    """
    n = len(series)
    if n <= p + n_test:
        raise SeriesTooShort(f"Series '{series.name}' has {n} values; {p} lags and {n_test} test months need more")
    if isinstance(model_or_config, SvrConfig):
        model = fit(make_supervised(series.slice(0, n - n_test), p), model_or_config)
    else:
        model = model_or_config
    values = series.array
    rows = np.array([values[t - p:t] for t in range(n - n_test, n)])
    return predict_many(model, rows)
