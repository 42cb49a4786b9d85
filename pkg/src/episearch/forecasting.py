"""Short-term outcome forecasting and its rolling evaluation.

Three model kinds are compared: a GP on outcome lags ("ar"), a GP on
outcome plus search lags ("sar"), and last-observed-value persistence
("per"). Evaluation retrains at every test day on data available strictly
up to the information cutoff and reports the mean absolute error and its
spread per model.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass

import numpy as np

from .errors import (
    AlignmentError,
    InsufficientHistoryError,
    NumericalError,
    ValidationError,
)
from .gp import GaussianProcessForecaster
from .timeseries import TimeSeries
from .validation import check_positive_int

MODEL_KINDS = ("ar", "sar", "per")


@dataclass(frozen=True)
class LaggedDesign:
    """Lagged feature rows with horizon-ahead targets.

    Row i observes days up to ``last_obs_index[i]`` and targets the value
    ``horizon`` days later.
    """

    X: np.ndarray
    targets: np.ndarray
    lags: int
    horizon: int
    kind: str
    start_date: dt.date
    last_obs_index: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        t = np.asarray(self.targets, dtype=float)
        if X.shape[0] != t.size:
            raise AlignmentError("one target per design row is required")
        expected = (self.lags + 1) * (2 if self.kind == "sar" else 1)
        if X.shape[1] != expected:
            raise ValidationError(f"rows must have dimension {expected}")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "targets", t)

    @property
    def target_index(self) -> np.ndarray:
        return self.last_obs_index + self.horizon


def _feature_row(z: np.ndarray | None, y: np.ndarray, t: int, lags: int, kind: str):
    window = slice(t - lags, t + 1)
    if kind == "sar":
        return np.concatenate([z[window][::-1], y[window][::-1]])
    return y[window][::-1]


def build_design(
    z: TimeSeries | None, y: TimeSeries, lags: int, horizon: int, kind: str
) -> LaggedDesign:
    """One row per day with full lag history and an observable target.

    ``z`` is the averaged normalized search frequency; it is required for
    the "sar" kind and must share the outcome series' span.
    """
    if kind not in ("ar", "sar"):
        raise ValidationError(f"kind must be 'ar' or 'sar', got {kind!r}")
    check_positive_int(lags, "lags", minimum=0)
    check_positive_int(horizon, "horizon")
    if kind == "sar":
        if z is None:
            raise ValidationError("the sar design needs the search series")
        if z.start_date != y.start_date or len(z) != len(y):
            raise AlignmentError("search and outcome series must share one span")
        z_vals = z.values
    else:
        z_vals = None
    n = len(y)
    if n < lags + horizon + 1:
        raise InsufficientHistoryError(
            f"need at least lags+horizon+1 = {lags + horizon + 1} days, got {n}"
        )
    rows, targets, last_obs = [], [], []
    for t in range(lags, n - horizon):
        rows.append(_feature_row(z_vals, y.values, t, lags, kind))
        targets.append(y.values[t + horizon])
        last_obs.append(t)
    return LaggedDesign(
        X=np.asarray(rows),
        targets=np.asarray(targets),
        lags=lags,
        horizon=horizon,
        kind=kind,
        start_date=y.start_date,
        last_obs_index=np.asarray(last_obs),
    )


def persistence_forecast(y: TimeSeries, horizon: int) -> TimeSeries:
    """Forecast the last observed value: the series shifted forward."""
    check_positive_int(horizon, "horizon")
    return TimeSeries(y.start_date + dt.timedelta(days=horizon), y.values)


@dataclass(frozen=True)
class ForecastRecord:
    """Per-day forecasts of one model over the test period."""

    model: str
    horizon: int
    lags: int
    target_dates: tuple[dt.date, ...]
    forecasts: np.ndarray
    stddevs: np.ndarray
    truths: np.ndarray
    missing_dates: tuple[dt.date, ...]
    mae_mean: float
    mae_std: float
    leakage_checks: int

    def __post_init__(self):
        for name in ("forecasts", "stddevs", "truths"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if not (len(self.target_dates) == self.forecasts.size == self.truths.size):
            raise AlignmentError("forecasts, truths, and dates must align")
        recomputed = float(np.abs(self.forecasts - self.truths).mean())
        if abs(recomputed - self.mae_mean) > 1e-12:
            raise ValidationError("stored MAE does not match the stored forecasts")

    def absolute_errors(self) -> np.ndarray:
        return np.abs(self.forecasts - self.truths)


def _first_test_index(
    y: TimeSeries, min_cumulative: float, start_date: dt.date | None, min_feasible: int
) -> int:
    cumulative = np.cumsum(y.values)
    above = np.flatnonzero(cumulative >= min_cumulative)
    if above.size == 0:
        raise InsufficientHistoryError(
            f"cumulative outcome never reaches {min_cumulative}"
        )
    first = int(above[0])
    if start_date is not None:
        first = max(first, (start_date - y.start_date).days)
    return max(first, min_feasible)


def rolling_evaluation(
    z: TimeSeries | None,
    y: TimeSeries,
    lags: int,
    horizon: int,
    models: tuple[str, ...] = MODEL_KINDS,
    min_cumulative: float = 10.0,
    start_date: dt.date | None = None,
    seed: int = 0,
    gp_restarts: int = 5,
    gp_max_iter: int = 150,
) -> dict[str, ForecastRecord]:
    """Retrain-at-every-step evaluation of the requested model kinds.

    Testing starts once satisfying the start rule (cumulative outcome
    threshold, optional earliest date) and data suffices for at least two
    training rows. The forecast for day t+horizon only ever uses data
    through day t; a violated cutoff raises immediately. Days where a GP
    fit fails numerically are recorded as missing and excluded from the
    error summary.
    """
    unknown = set(models) - set(MODEL_KINDS)
    if unknown:
        raise ValidationError(f"unknown model kinds {sorted(unknown)}")
    if "sar" in models and z is None:
        raise ValidationError("the sar model needs the search series")
    n = len(y)
    min_feasible = 2 * horizon + lags + 1
    first = _first_test_index(y, min_cumulative, start_date, min_feasible)
    if first >= n:
        raise InsufficientHistoryError("no admissible test day in the series")

    results: dict[str, ForecastRecord] = {}
    for kind in models:
        dates, forecasts, stddevs, truths, missing = [], [], [], [], []
        checks = 0
        for target_day in range(first, n):
            cutoff = target_day - horizon
            if kind == "per":
                forecast, std = float(y.values[cutoff]), float("nan")
            else:
                z_prefix = z.slice(0, cutoff + 1) if kind == "sar" else None
                y_prefix = y.slice(0, cutoff + 1)
                design = build_design(z_prefix, y_prefix, lags, horizon, kind)
                if int(design.target_index.max()) > cutoff:
                    raise NumericalError(
                        "training rows would leak past the information cutoff"
                    )
                checks += 1
                x_star = _feature_row(
                    None if kind == "ar" else z.values, y.values, cutoff, lags, kind
                )[None, :]
                try:
                    gp = GaussianProcessForecaster(
                        kind=kind,
                        n_restarts=gp_restarts,
                        max_iter=gp_max_iter,
                        random_state=seed,
                    ).fit(design.X, design.targets)
                    mean, std_arr = gp.predict(x_star, return_std=True)
                except NumericalError:
                    missing.append(y.date_at(target_day))
                    continue
                forecast, std = float(mean[0]), float(std_arr[0])
            dates.append(y.date_at(target_day))
            forecasts.append(forecast)
            stddevs.append(std)
            truths.append(float(y.values[target_day]))
        if not dates:
            raise InsufficientHistoryError(f"no usable test day for model {kind!r}")
        errors = np.abs(np.asarray(forecasts) - np.asarray(truths))
        results[kind] = ForecastRecord(
            model=kind,
            horizon=horizon,
            lags=lags,
            target_dates=tuple(dates),
            forecasts=np.asarray(forecasts),
            stddevs=np.asarray(stddevs),
            truths=np.asarray(truths),
            missing_dates=tuple(missing),
            mae_mean=float(errors.mean()),
            mae_std=float(errors.std()),
            leakage_checks=checks,
        )
    return results


def normalize_mae_table(table: dict[str, dict]) -> dict:
    """Joint min-max over every cell, then the per-column mean.

    ``table`` maps country to a mapping of column key (model, horizon) to
    its MAE; all countries must provide the same columns. An all-equal
    table normalizes to zeros.
    """
    if not table:
        raise ValidationError("table must not be empty")
    countries = sorted(table)
    keys = sorted(table[countries[0]])
    for country in countries:
        if sorted(table[country]) != keys:
            raise ValidationError(f"incomplete table: {country} misses columns")
    values = np.array([[table[c][k] for k in keys] for c in countries], dtype=float)
    lo, hi = float(values.min()), float(values.max())
    if hi == lo:
        return {k: 0.0 for k in keys}
    normalized = (values - lo) / (hi - lo)
    return {k: float(normalized[:, j].mean()) for j, k in enumerate(keys)}
