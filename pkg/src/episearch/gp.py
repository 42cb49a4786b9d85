"""Gaussian-process regression with composite squared-exponential kernels.

Two kernel layouts are supported: "sar" rows carry a search slice and an
outcome slice (separate SE components per slice plus a joint one plus
noise), "ar" rows carry outcome lags only (two SE components plus noise).
Hyperparameters are chosen by maximizing the exact log marginal likelihood
with analytic gradients, restarting from perturbed initializations.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.optimize import minimize
from sklearn.base import BaseEstimator, RegressorMixin

from .errors import NumericalError, ValidationError
from .timeseries import NormalizationParams, denormalize_array, normalize_array
from .validation import as_float_array, check_matrix_target, check_positive

JITTER_START = 1e-10
JITTER_MAX = 1e-4
_LOG_BOUNDS = (-15.0, 15.0)


def se_kernel(x, x2, sigma: float, ell: float) -> float:
    """Squared-exponential covariance sigma^2 exp(-||x-x'||^2 / (2 ell^2))."""
    check_positive(sigma, "sigma")
    check_positive(ell, "ell")
    a = as_float_array(x, "x", ndim=1)
    b = as_float_array(x2, "x2", ndim=1)
    if a.shape != b.shape:
        raise ValidationError("inputs must have equal dimension")
    d2 = float(((a - b) ** 2).sum())
    return float(sigma**2 * np.exp(-d2 / (2.0 * ell**2)))


def composite_kernel_sarf(x, x2, params) -> float:
    """Search-and-outcome kernel: SE per slice, SE jointly, plus noise.

    ``params`` is (sigma1, ell1, sigma2, ell2, sigma3, ell3, sigma_noise);
    the noise term applies only when the two inputs are identical.
    """
    a = as_float_array(x, "x", ndim=1)
    b = as_float_array(x2, "x2", ndim=1)
    if a.shape != b.shape or a.size % 2 != 0:
        raise ValidationError("inputs must share an even dimension")
    p = as_float_array(params, "params", ndim=1)
    if p.size != 7:
        raise ValidationError("expected 7 hyperparameters")
    half = a.size // 2
    value = (
        se_kernel(a[:half], b[:half], p[0], p[1])
        + se_kernel(a[half:], b[half:], p[2], p[3])
        + se_kernel(a, b, p[4], p[5])
    )
    if np.array_equal(a, b):
        value += p[6] ** 2
    return float(value)


def composite_kernel_arf(y, y2, params) -> float:
    """Outcome-only kernel: two SE components plus noise.

    ``params`` is (sigma1, ell1, sigma2, ell2, sigma_noise).
    """
    a = as_float_array(y, "y", ndim=1)
    b = as_float_array(y2, "y2", ndim=1)
    if a.shape != b.shape:
        raise ValidationError("inputs must have equal dimension")
    p = as_float_array(params, "params", ndim=1)
    if p.size != 5:
        raise ValidationError("expected 5 hyperparameters")
    value = se_kernel(a, b, p[0], p[1]) + se_kernel(a, b, p[2], p[3])
    if np.array_equal(a, b):
        value += p[4] ** 2
    return float(value)


def _sq_dists(A: np.ndarray, B: np.ndarray | None = None) -> np.ndarray:
    if B is None:
        B = A
    aa = (A * A).sum(axis=1)[:, None]
    bb = (B * B).sum(axis=1)[None, :]
    return np.maximum(aa + bb - 2.0 * (A @ B.T), 0.0)


class _KernelLayout:
    """Slice layout and parameter count for one kernel kind."""

    def __init__(self, kind: str, dim: int):
        if kind == "sar":
            if dim % 2 != 0:
                raise ValidationError("sar rows must have even dimension")
            half = dim // 2
            self.slices = [slice(0, half), slice(half, dim), slice(0, dim)]
        elif kind == "ar":
            self.slices = [slice(0, dim), slice(0, dim)]
        else:
            raise ValidationError(f"unknown kernel kind {kind!r}")
        self.kind = kind
        self.n_se = len(self.slices)
        self.n_params = 2 * self.n_se + 1  # (sigma, ell) per SE plus noise

    def se_terms(self, params, X, X2=None):
        """Per-component sigma^2 * exp(...) matrices (no noise)."""
        terms = []
        for c, sl in enumerate(self.slices):
            sigma, ell = params[2 * c], params[2 * c + 1]
            d2 = _sq_dists(X[:, sl], None if X2 is None else X2[:, sl])
            terms.append(sigma**2 * np.exp(-d2 / (2.0 * ell**2)))
        return terms

    def gram(self, params, X):
        K = sum(self.se_terms(params, X))
        return K + params[-1] ** 2 * np.eye(X.shape[0])

    def cross(self, params, X_new, X_train):
        return sum(self.se_terms(params, X_new, X_train))

    def prior_variance(self, params) -> float:
        # kernel value at identical points, noise included
        return float(sum(params[2 * c] ** 2 for c in range(self.n_se)) + params[-1] ** 2)

    def gram_gradients(self, params, X):
        """dK/d(log theta_i) alongside the Gram matrix."""
        terms = self.se_terms(params, X)
        n = X.shape[0]
        K = sum(terms) + params[-1] ** 2 * np.eye(n)
        grads = []
        for c, sl in enumerate(self.slices):
            ell = params[2 * c + 1]
            d2 = _sq_dists(X[:, sl])
            grads.append(2.0 * terms[c])  # wrt log sigma_c
            grads.append(terms[c] * (d2 / ell**2))  # wrt log ell_c
        grads.append(2.0 * params[-1] ** 2 * np.eye(n))  # wrt log noise
        return K, grads


def _chol_with_jitter(K: np.ndarray) -> tuple[np.ndarray, float]:
    try:
        return cholesky(K, lower=True), 0.0
    except np.linalg.LinAlgError:
        pass
    jitter = JITTER_START
    eye = np.eye(K.shape[0])
    while jitter <= JITTER_MAX:
        try:
            return cholesky(K + jitter * eye, lower=True), jitter
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise NumericalError(
        f"kernel matrix is not positive definite even with jitter {JITTER_MAX}"
    )


class GaussianProcessForecaster(BaseEstimator, RegressorMixin):
    """GP regressor over lagged designs with a composite SE kernel.

    Parameters
    ----------
    kind : {"sar", "ar"}
        Row layout: search plus outcome slices, or outcome lags only.
    n_restarts : int
        Optimizer starts; the first uses the data-driven initialization,
        the rest perturb it log-uniformly within a factor of 10.
    max_iter : int
        L-BFGS iteration cap per start.
    random_state : int
        Seed for the restart perturbations.
    optimize : bool
        When False the initialization (or ``init_params``) is used as-is.
    init_params : array-like, optional
        Natural-scale hyperparameters overriding the data-driven start.
    normalize_targets : bool
        Min-max scale targets internally; predictions are mapped back.
    """

    def __init__(
        self,
        kind="sar",
        n_restarts=5,
        max_iter=200,
        random_state=0,
        optimize=True,
        init_params=None,
        normalize_targets=True,
    ):
        self.kind = kind
        self.n_restarts = n_restarts
        self.max_iter = max_iter
        self.random_state = random_state
        self.optimize = optimize
        self.init_params = init_params
        self.normalize_targets = normalize_targets

    def _initial_params(self, layout, X, y) -> np.ndarray:
        variance = float(np.var(y))
        if variance <= 0.0:
            variance = 1e-2
        params = np.empty(layout.n_params)
        for c, sl in enumerate(layout.slices):
            params[2 * c] = np.sqrt(variance / layout.n_se)
            block = X[:, sl]
            if block.shape[0] > 1:
                d2 = _sq_dists(block)
                positive = d2[np.triu_indices_from(d2, k=1)]
                median = float(np.sqrt(np.median(positive))) if positive.size else 0.0
            else:
                median = 0.0
            params[2 * c + 1] = median if median > 0.0 else 1.0
        params[-1] = np.sqrt(0.1 * variance)
        return params

    def fit(self, X, y):
        X, y = check_matrix_target(X, y)
        if X.shape[0] < 2:
            raise ValidationError("need at least 2 training rows")
        if self.normalize_targets:
            y_norm, self.y_params_ = normalize_array(y)
        else:
            y_norm, self.y_params_ = y, NormalizationParams(0.0, 1.0)
        layout = _KernelLayout(self.kind, X.shape[1])
        self._layout_ = layout
        self.X_train_ = X
        self._y_train_ = y_norm

        if self.init_params is not None:
            base = as_float_array(self.init_params, "init_params", ndim=1)
            if base.size != layout.n_params:
                raise ValidationError(f"expected {layout.n_params} hyperparameters")
        else:
            base = self._initial_params(layout, X, y_norm)

        candidates = [np.log(base)]
        for restart in range(1, max(1, int(self.n_restarts))):
            rng = np.random.default_rng(self.random_state * 1_000_003 + restart)
            factors = rng.uniform(-np.log(10.0), np.log(10.0), layout.n_params)
            candidates.append(np.log(base) + factors)

        if self.optimize:
            best_log, best_value = None, np.inf
            for start in candidates:
                result = minimize(
                    self._negative_lml,
                    np.clip(start, *_LOG_BOUNDS),
                    jac=True,
                    method="L-BFGS-B",
                    bounds=[_LOG_BOUNDS] * layout.n_params,
                    options={"maxiter": int(self.max_iter)},
                )
                if result.fun < best_value:
                    best_value, best_log = result.fun, result.x
            if best_log is None:
                raise NumericalError("hyperparameter optimization failed on every start")
            self.log_params_ = best_log
        else:
            self.log_params_ = candidates[0]

        self.params_ = np.exp(self.log_params_)
        K = layout.gram(self.params_, X)
        self.L_, self.jitter_ = _chol_with_jitter(K)
        self.alpha_ = cho_solve((self.L_, True), y_norm)
        self.lml_ = self.log_marginal_likelihood(self.log_params_)
        return self

    def _negative_lml(self, log_params):
        try:
            value, grad = self.log_marginal_likelihood(log_params, eval_gradient=True)
        except NumericalError:
            return 1e25, np.zeros_like(log_params)
        return -value, -grad

    def log_marginal_likelihood(self, log_params=None, eval_gradient=False):
        """Exact log marginal likelihood of the stored training data.

        With ``eval_gradient`` the derivative with respect to the
        log-hyperparameters is returned as well.
        """
        if log_params is None:
            log_params = self.log_params_
        params = np.exp(np.asarray(log_params, dtype=float))
        layout = self._layout_
        X, y = self.X_train_, self._y_train_
        n = X.shape[0]
        if eval_gradient:
            K, grads = layout.gram_gradients(params, X)
        else:
            K = layout.gram(params, X)
        L, _ = _chol_with_jitter(K)
        alpha = cho_solve((L, True), y)
        value = float(
            -0.5 * (y @ alpha) - np.log(np.diag(L)).sum() - 0.5 * n * np.log(2.0 * np.pi)
        )
        if not eval_gradient:
            return value
        K_inv = cho_solve((L, True), np.eye(n))
        outer = np.outer(alpha, alpha) - K_inv
        gradient = np.array([0.5 * np.sum(outer * dK) for dK in grads])
        return value, gradient

    def predict(self, X, return_std=False):
        """Posterior mean (and predictive standard deviation) at new rows."""
        X = as_float_array(X, "X", ndim=2)
        if X.shape[1] != self.X_train_.shape[1]:
            raise ValidationError(
                f"X must have {self.X_train_.shape[1]} columns, got {X.shape[1]}"
            )
        layout = self._layout_
        k_star = layout.cross(self.params_, X, self.X_train_)
        mean_norm = k_star @ self.alpha_
        span = self.y_params_.max - self.y_params_.min
        mean = denormalize_array(mean_norm, self.y_params_) if self.normalize_targets else mean_norm
        if not return_std:
            return mean
        v = solve_triangular(self.L_, k_star.T, lower=True)
        var_norm = layout.prior_variance(self.params_) - (v * v).sum(axis=0)
        var_norm = np.maximum(var_norm, 0.0)
        scale = span if self.normalize_targets else 1.0
        return mean, np.sqrt(var_norm) * scale
