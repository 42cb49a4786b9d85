"""Date-aligned daily time series and the shared transforms.

A :class:`TimeSeries` is a gap-free run of daily values anchored at a start
date. All transforms are pure functions: they never mutate their inputs and
return new series with a documented span (same length, or shortened by a
stated warm-up).
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass

import numpy as np

from .errors import (
    AlignmentError,
    DegenerateInputError,
    InsufficientHistoryError,
    InsufficientOverlapError,
    ValidationError,
)
from .validation import check_positive_int, series_values

ONE_DAY = dt.timedelta(days=1)


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Daily real-valued series: one value per consecutive calendar day."""

    start_date: dt.date
    values: np.ndarray

    def __post_init__(self):
        if not isinstance(self.start_date, dt.date) or isinstance(self.start_date, dt.datetime):
            raise ValidationError("start_date must be a datetime.date")
        v = np.array(self.values, dtype=float)
        if v.ndim != 1 or v.size == 0:
            raise ValidationError("values must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(v)):
            raise ValidationError("values must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size

    def __eq__(self, other):
        if not isinstance(other, TimeSeries):
            return NotImplemented
        return self.start_date == other.start_date and np.array_equal(self.values, other.values)

    @property
    def end_date(self) -> dt.date:
        return self.start_date + dt.timedelta(days=len(self) - 1)

    def dates(self) -> list[dt.date]:
        return [self.start_date + dt.timedelta(days=i) for i in range(len(self))]

    def date_at(self, i: int) -> dt.date:
        if not 0 <= i < len(self):
            raise ValidationError(f"index {i} out of range for series of length {len(self)}")
        return self.start_date + dt.timedelta(days=i)

    def index_of(self, date: dt.date) -> int:
        offset = (date - self.start_date).days
        if not 0 <= offset < len(self):
            raise ValidationError(f"{date} lies outside the series span")
        return offset

    def with_values(self, values) -> "TimeSeries":
        """New series over the same dates with replaced values."""
        v = np.asarray(values, dtype=float)
        if v.shape != self.values.shape:
            raise AlignmentError("replacement values must match the series length")
        return TimeSeries(self.start_date, v)

    def slice(self, start: int, stop: int) -> "TimeSeries":
        if not (0 <= start < stop <= len(self)):
            raise ValidationError(f"invalid slice [{start}, {stop}) for length {len(self)}")
        return TimeSeries(self.start_date + dt.timedelta(days=start), self.values[start:stop])

    def window(self, start_date: dt.date, n_days: int) -> "TimeSeries":
        i = self.index_of(start_date)
        if i + n_days > len(self):
            raise InsufficientHistoryError(
                f"window of {n_days} days from {start_date} exceeds the series span"
            )
        return self.slice(i, i + n_days)


@dataclass(frozen=True, eq=False)
class WeeklySeries:
    """Weekly cadence series: one value per Monday-aligned week."""

    week_start: dt.date
    values: np.ndarray

    def __post_init__(self):
        if self.week_start.weekday() != 0:
            raise ValidationError("week_start must fall on a Monday")
        v = np.array(self.values, dtype=float)
        if v.ndim != 1 or v.size == 0:
            raise ValidationError("values must be a non-empty 1-D sequence")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size

    def week_starts(self) -> list[dt.date]:
        return [self.week_start + dt.timedelta(days=7 * i) for i in range(len(self))]


@dataclass(frozen=True)
class NormalizationParams:
    """Min/max pair captured when scaling a series into [0, 1]."""

    min: float
    max: float
    constant: bool = False

    def __post_init__(self):
        if self.max < self.min:
            raise ValidationError("max must be >= min")


@dataclass(frozen=True)
class LagCorrelation:
    """Best temporal shift and its Pearson correlation.

    Positive ``lag_days`` means the second series was shifted back in time
    (it trails the first by that many days).
    """

    lag_days: int
    r: float

    def __post_init__(self):
        if abs(self.r) > 1.0 + 1e-12:
            raise ValidationError("correlation must lie in [-1, 1]")


def align_pair(a: TimeSeries, b: TimeSeries) -> tuple[TimeSeries, TimeSeries]:
    """Slice two series to their common date range."""
    start = max(a.start_date, b.start_date)
    end = min(a.end_date, b.end_date)
    if start > end:
        raise AlignmentError("series do not overlap")
    n = (end - start).days + 1
    return a.window(start, n), b.window(start, n)


def _harmonic_kernel(window: int) -> np.ndarray:
    # weight 1/p on the value p-1 days back, normalized to sum 1
    weights = 1.0 / np.arange(1, window + 1)
    return weights / weights.sum()


def harmonic_smooth(s: TimeSeries, window: int) -> TimeSeries:
    """Trailing harmonically-weighted mean over the past ``window`` days.

    The value for day i averages days i-window+1 .. i with weights 1/1,
    1/2, ..., 1/window (most recent weighted highest). The output drops the
    first window-1 days of warm-up.
    """
    window = check_positive_int(window, "window")
    if len(s) < window:
        raise InsufficientHistoryError(
            f"series of length {len(s)} is shorter than the smoothing window {window}"
        )
    smoothed = smooth_columns(s.values[:, None], window)[:, 0]
    return TimeSeries(s.start_date + dt.timedelta(days=window - 1), smoothed)


def smooth_columns(X: np.ndarray, window: int) -> np.ndarray:
    """Column-wise harmonic smoothing of a (days x series) matrix.

    Output has window-1 fewer rows; used wherever whole query panels are
    smoothed at once.
    """
    X = np.asarray(X, dtype=float)
    if X.shape[0] < window:
        raise InsufficientHistoryError(
            f"matrix with {X.shape[0]} rows is shorter than the smoothing window {window}"
        )
    kernel = _harmonic_kernel(window)
    # convolution kernel ordered so index p-1 multiplies the value p-1 days back
    out = np.empty((X.shape[0] - window + 1, X.shape[1]))
    for j in range(X.shape[1]):
        out[:, j] = np.convolve(X[:, j], kernel, mode="valid")
    return out


def _is_constant_range(lo: float, hi: float) -> bool:
    # guards against IEEE noise (e.g. residuals of detrending a constant)
    return hi - lo <= 1e-12 * max(1.0, abs(lo), abs(hi))


def min_max_normalize(s: TimeSeries) -> tuple[TimeSeries, NormalizationParams]:
    """Scale into [0, 1]; a constant series maps to zeros and is flagged."""
    lo = float(s.values.min())
    hi = float(s.values.max())
    if _is_constant_range(lo, hi):
        params = NormalizationParams(lo, hi, constant=True)
        return s.with_values(np.zeros(len(s))), params
    params = NormalizationParams(lo, hi)
    return s.with_values((s.values - lo) / (hi - lo)), params


def min_max_denormalize(s: TimeSeries, params: NormalizationParams) -> TimeSeries:
    """Inverse of :func:`min_max_normalize` given its recorded params."""
    return s.with_values(s.values * (params.max - params.min) + params.min)


def normalize_array(x: np.ndarray) -> tuple[np.ndarray, NormalizationParams]:
    """Array variant of :func:`min_max_normalize` for matrix pipelines."""
    x = np.asarray(x, dtype=float)
    lo = float(x.min())
    hi = float(x.max())
    if _is_constant_range(lo, hi):
        return np.zeros_like(x), NormalizationParams(lo, hi, constant=True)
    return (x - lo) / (hi - lo), NormalizationParams(lo, hi)


def denormalize_array(x: np.ndarray, params: NormalizationParams) -> np.ndarray:
    return np.asarray(x, dtype=float) * (params.max - params.min) + params.min


def z_score(s: TimeSeries) -> TimeSeries:
    """Standardize to mean 0 and population standard deviation 1."""
    if len(s) < 2:
        raise InsufficientHistoryError("z-score needs at least 2 points")
    mu = s.values.mean()
    sigma = s.values.std()  # population sigma
    if sigma == 0.0:
        raise DegenerateInputError("cannot z-score a constant series")
    return s.with_values((s.values - mu) / sigma)


def linear_detrend(s: TimeSeries) -> TimeSeries:
    """Residuals after removing the least-squares line over the day index."""
    if len(s) < 2:
        raise InsufficientHistoryError("detrending needs at least 2 points")
    t = np.arange(len(s), dtype=float)
    slope, intercept = np.polyfit(t, s.values, 1)
    return s.with_values(s.values - (slope * t + intercept))


def moving_average(s: TimeSeries, window: int) -> TimeSeries:
    """Centered moving average; edges use the truncated in-range window."""
    window = check_positive_int(window, "window")
    if window % 2 == 0:
        raise ValidationError("moving-average window must be odd")
    if len(s) < window:
        raise InsufficientHistoryError(
            f"series of length {len(s)} is shorter than the window {window}"
        )
    kernel = np.ones(window)
    sums = np.convolve(s.values, kernel, mode="same")
    counts = np.convolve(np.ones(len(s)), kernel, mode="same")
    return s.with_values(sums / counts)


def resample_weekly(s: TimeSeries) -> WeeklySeries:
    """Mean per complete Monday-aligned week; partial edge weeks dropped."""
    first_monday = (7 - s.start_date.weekday()) % 7
    n_weeks = (len(s) - first_monday) // 7
    if n_weeks < 1:
        raise InsufficientHistoryError("no complete Monday-aligned week in the series")
    block = s.values[first_monday : first_monday + 7 * n_weeks].reshape(n_weeks, 7)
    return WeeklySeries(s.start_date + dt.timedelta(days=first_monday), block.mean(axis=1))


def pearson(a, b) -> float:
    """Pearson correlation of two equal-length series."""
    x = series_values(a, "first series")
    y = series_values(b, "second series")
    if x.size != y.size:
        raise AlignmentError(f"length mismatch: {x.size} vs {y.size}")
    if x.size < 3:
        raise InsufficientHistoryError("correlation needs at least 3 points")
    xc = x - x.mean()
    yc = y - y.mean()
    sx = np.sqrt((xc * xc).sum())
    sy = np.sqrt((yc * yc).sum())
    if sx == 0.0 or sy == 0.0:
        raise DegenerateInputError("correlation is undefined for a constant series")
    r = float((xc * yc).sum() / (sx * sy))
    return max(-1.0, min(1.0, r))


def _shift_candidates(max_shift: int):
    # deterministic tie order: smallest |lag| first, negative before positive
    yield 0
    for k in range(1, max_shift + 1):
        yield -k
        yield k


def best_lag_correlation(a: TimeSeries, b: TimeSeries, max_shift: int) -> LagCorrelation:
    """Shift maximizing the Pearson correlation over the overlap.

    A shift k compares a[t] against b[t+k]; ties break toward the smallest
    absolute lag, then toward the negative lag.
    """
    check_positive_int(max_shift, "max_shift", minimum=0)
    if a.start_date != b.start_date or len(a) != len(b):
        raise AlignmentError("series must share their span before lag scanning")
    n = len(a)
    best: LagCorrelation | None = None
    for k in _shift_candidates(max_shift):
        lo = max(0, -k)
        hi = min(n, n - k)
        if hi - lo < 3:
            continue
        try:
            r = pearson(a.values[lo:hi], b.values[lo + k : hi + k])
        except DegenerateInputError:
            continue
        if best is None or r > best.r:
            best = LagCorrelation(k, r)
    if best is None:
        raise InsufficientOverlapError(
            f"no shift within +/-{max_shift} days leaves a usable overlap"
        )
    return best


def mae(est, truth) -> float:
    """Mean absolute error between two equal-length series."""
    x = series_values(est, "estimate")
    y = series_values(truth, "truth")
    if x.size != y.size:
        raise AlignmentError(f"length mismatch: {x.size} vs {y.size}")
    return float(np.abs(x - y).mean())
