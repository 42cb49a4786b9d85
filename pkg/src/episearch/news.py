"""News-media deconfounding of the search score.

For each day, two small autoregressions are fit on a trailing window of the
normalized score: one on its own lags, one additionally on the current and
two lagged values of the news-coverage ratio. The ratio of their one-step
absolute forecast errors estimates the fraction of the score attributable
to infection rather than media-driven concern; multiplying the score by
that fraction yields the adjusted signal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    AlignmentError,
    DegenerateInputError,
    InsufficientHistoryError,
    ValidationError,
)
from .timeseries import (
    TimeSeries,
    harmonic_smooth,
    min_max_normalize,
    normalize_array,
    pearson,
)
from .validation import check_positive_int, check_unit_interval

AR_LAGS = 2
NEWS_LAGS = 3  # current day plus two lagged values

# numerical guard on the Gram matrix, not a model change
_GRAM_RIDGE = 1e-10
_RANK_RTOL = 1e-8


@dataclass(frozen=True)
class NewsRatio:
    """Daily proportion of pandemic-related news articles, in [0, 1]."""

    series: TimeSeries

    def __post_init__(self):
        check_unit_interval(self.series.values, "news ratio")


@dataclass(frozen=True)
class GammaSeries:
    """Daily infection-attributable fraction of the search score."""

    series: TimeSeries

    def __post_init__(self):
        check_unit_interval(self.series.values, "gamma")


@dataclass(frozen=True)
class ArFit:
    """Least-squares lag model: weights, intercept, and in-sample fit."""

    lag_weights: np.ndarray
    intercept: float
    in_sample_mse: float
    rank_deficient: bool = False

    def __post_init__(self):
        if not np.all(np.isfinite(self.lag_weights)) or not np.isfinite(self.intercept):
            raise ValidationError("fit produced non-finite coefficients")
        if self.in_sample_mse < 0:
            raise ValidationError("in-sample MSE cannot be negative")
        w = np.array(self.lag_weights, dtype=float)
        w.flags.writeable = False
        object.__setattr__(self, "lag_weights", w)


def _solve_ols(A: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, bool]:
    """OLS via ridge-guarded normal equations; minimum-norm on rank deficiency."""
    singular = np.linalg.svd(A, compute_uv=False)
    deficient = bool(singular[-1] <= singular[0] * _RANK_RTOL)
    if deficient:
        coef = np.linalg.lstsq(A, y, rcond=None)[0]
    else:
        gram = A.T @ A + _GRAM_RIDGE * np.eye(A.shape[1])
        coef = np.linalg.solve(gram, A.T @ y)
    return coef, deficient


def _lagged_design(g: np.ndarray, m: np.ndarray | None) -> tuple[np.ndarray, np.ndarray]:
    targets = g[AR_LAGS:]
    columns = [g[1:-1], g[:-2]]
    if m is not None:
        columns += [m[2:], m[1:-1], m[:-2]]
    columns.append(np.ones_like(targets))
    return np.column_stack(columns), targets


def fit_ar(g_window: TimeSeries) -> ArFit:
    """Two-lag autoregression of the score over one window."""
    if len(g_window) < 4:
        raise InsufficientHistoryError("autoregression needs a window of at least 4 days")
    A, targets = _lagged_design(g_window.values, None)
    coef, deficient = _solve_ols(A, targets)
    residuals = targets - A @ coef
    return ArFit(coef[:-1], float(coef[-1]), float(np.mean(residuals**2)), deficient)


def fit_ar_exog(g_window: TimeSeries, m_window: TimeSeries) -> ArFit:
    """Autoregression augmented with current and lagged news ratios."""
    if len(g_window) < 4:
        raise InsufficientHistoryError("autoregression needs a window of at least 4 days")
    if g_window.start_date != m_window.start_date or len(g_window) != len(m_window):
        raise AlignmentError("score and news windows must share one span")
    A, targets = _lagged_design(g_window.values, m_window.values)
    coef, deficient = _solve_ols(A, targets)
    residuals = targets - A @ coef
    return ArFit(coef[:-1], float(coef[-1]), float(np.mean(residuals**2)), deficient)


def _forecast_one_step(fit: ArFit, g: np.ndarray, m: np.ndarray | None, t: int) -> float:
    features = [g[t - 1], g[t - 2]]
    if m is not None:
        features += [m[t], m[t - 1], m[t - 2]]
    return float(np.dot(fit.lag_weights, features) + fit.intercept)


def _gamma_from_errors(eps_ar: float, eps_news: float) -> float:
    if eps_ar <= eps_news:
        # news did not improve the forecast
        return 1.0
    return eps_news / eps_ar


def gamma_at(g: TimeSeries, m: TimeSeries, t: int, window: int = 56) -> float:
    """Infection-attributable fraction for day index ``t``.

    Both models are fit on the ``window`` days ending at t-1; their one-step
    absolute errors against the true value at t give the fraction. Inputs
    are expected min-max normalized to [0, 1].
    """
    check_positive_int(window, "window", minimum=4)
    if g.start_date != m.start_date or len(g) != len(m):
        raise AlignmentError("score and news series must share one span")
    if t < window or t >= len(g):
        raise InsufficientHistoryError(
            f"day index {t} needs {window} days of history within the span"
        )
    g_win = g.slice(t - window, t)
    m_win = m.slice(t - window, t)
    ar = fit_ar(g_win)
    ar_news = fit_ar_exog(g_win, m_win)
    truth = g.values[t]
    eps_ar = abs(truth - _forecast_one_step(ar, g.values, None, t))
    eps_news = abs(truth - _forecast_one_step(ar_news, g.values, m.values, t))
    return _gamma_from_errors(eps_ar, eps_news)


def gamma_series(
    g: TimeSeries,
    m: TimeSeries,
    window: int = 56,
    normalization: str = "full",
) -> GammaSeries:
    """Daily fractions, harmonically smoothed over a trailing 7-day window.

    ``normalization`` picks where the min-max scaling happens: "full"
    normalizes both series once over their whole span, "window" rescales
    each trailing window (and the forecast-day values) separately.

    Output spans the input minus the window and 6 smoothing warm-up days.
    """
    if normalization not in ("full", "window"):
        raise ValidationError(f"unknown normalization mode {normalization!r}")
    if g.start_date != m.start_date or len(g) != len(m):
        raise AlignmentError("score and news series must share one span")
    n = len(g)
    if n - window < 7:
        raise InsufficientHistoryError(
            f"need at least window+7 = {window + 7} days, got {n}"
        )
    if normalization == "full":
        g_norm, _ = min_max_normalize(g)
        m_norm, _ = min_max_normalize(m)
        raw = np.array([gamma_at(g_norm, m_norm, t, window) for t in range(window, n)])
    else:
        raw = np.empty(n - window)
        for i, t in enumerate(range(window, n)):
            g_vals, g_params = normalize_array(g.values[t - window : t])
            m_vals, m_params = normalize_array(m.values[t - window : t])
            g_win = TimeSeries(g.date_at(t - window), g_vals)
            m_win = TimeSeries(m.date_at(t - window), m_vals)
            ar = fit_ar(g_win)
            ar_news = fit_ar_exog(g_win, m_win)

            def scale(value, params):
                if params.constant:
                    return 0.0
                return (value - params.min) / (params.max - params.min)

            gv = np.concatenate([g_vals, [scale(g.values[t], g_params)]])
            mv = np.concatenate([m_vals, [scale(m.values[t], m_params)]])
            truth = gv[window]
            eps_ar = abs(truth - _forecast_one_step(ar, gv, None, window))
            eps_news = abs(truth - _forecast_one_step(ar_news, gv, mv, window))
            raw[i] = _gamma_from_errors(eps_ar, eps_news)
    raw_series = TimeSeries(g.date_at(window), raw)
    smoothed = harmonic_smooth(raw_series, 7)
    # the weighted mean is a convex combination; clip pure roundoff overshoot
    return GammaSeries(smoothed.with_values(np.clip(smoothed.values, 0.0, 1.0)))


def adjust_signal(g: TimeSeries, gamma: GammaSeries) -> TimeSeries:
    """Element-wise product of the score and its infection fraction."""
    if g.start_date != gamma.series.start_date or len(g) != len(gamma.series):
        raise AlignmentError("score and gamma series must share one span")
    return g.with_values(g.values * gamma.series.values)


@dataclass(frozen=True)
class PeakReport:
    """Reduction of the adjusted signal around and away from the raw peak."""

    peak_index: int
    in_window_reduction_pct: float
    out_window_reduction_pct: float
    in_window_r: float
    window_truncated: bool


def peak_reduction_report(
    raw: TimeSeries, adjusted: TimeSeries, half_window: int = 14
) -> PeakReport:
    """Percent mean reduction inside/outside +/-half_window of the raw peak."""
    check_positive_int(half_window, "half_window", minimum=0)
    if raw.start_date != adjusted.start_date or len(raw) != len(adjusted):
        raise AlignmentError("raw and adjusted series must share one span")
    n = len(raw)
    peak = int(np.argmax(raw.values))  # earliest maximum on ties
    lo = max(0, peak - half_window)
    hi = min(n, peak + half_window + 1)
    truncated = (peak - half_window < 0) or (peak + half_window + 1 > n)
    inside = np.zeros(n, dtype=bool)
    inside[lo:hi] = True

    def reduction(mask):
        raw_mean = raw.values[mask].mean()
        if raw_mean == 0.0:
            return float("nan")
        return 100.0 * (1.0 - adjusted.values[mask].mean() / raw_mean)

    in_reduction = reduction(inside)
    out_reduction = reduction(~inside) if (~inside).any() else float("nan")
    try:
        r = pearson(raw.values[inside], adjusted.values[inside])
    except (InsufficientHistoryError, DegenerateInputError):
        r = float("nan")
    return PeakReport(peak, in_reduction, out_reduction, r, truncated)
