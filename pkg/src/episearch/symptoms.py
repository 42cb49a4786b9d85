"""Symptom-weighted unsupervised scoring and its multi-year baseline band.

Query categories are aggregated, smoothed, detrended, and min-max scaled,
then combined into a single daily score as a weighted average. Historical
data yields a per-day-of-season mean trend with a two-standard-deviation
band for judging whether current activity is unusual.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field

import numpy as np

from .errors import AlignmentError, InsufficientHistoryError, ValidationError
from .timeseries import TimeSeries, harmonic_smooth, linear_detrend, min_max_normalize
from .validation import as_float_array

# Occurrence probability of each surveyed symptom among confirmed cases,
# used as the category weight vector.
SYMPTOM_OCCURRENCE_PROBABILITIES: dict[str, float] = {
    "cough": 0.777,
    "fatigue": 0.709,
    "fever": 0.601,
    "headache": 0.567,
    "muscle ache": 0.509,
    "appetite loss": 0.441,
    "shortness of breath": 0.404,
    "sore throat": 0.386,
    "joint ache": 0.339,
    "runny nose": 0.325,
    "loss of smell": 0.291,
    "diarrhoea": 0.276,
    "sneezing": 0.239,
    "nausea": 0.236,
    "vomiting": 0.087,
    "altered consciousness": 0.068,
    "nose bleed": 0.060,
    "rash": 0.052,
    "seizure": 0.008,
}

DISEASE_TERMS_CATEGORY = "disease terms"
DISEASE_TERMS_WEIGHT = 1.0


def symptom_weights() -> dict[str, float]:
    """Copy of the default symptom weight table (19 entries)."""
    return dict(SYMPTOM_OCCURRENCE_PROBABILITIES)


@dataclass(frozen=True)
class SymptomCategory:
    """One query set: a named symptom, its weight, and its member queries."""

    name: str
    weight: float
    member_queries: tuple[str, ...]
    is_disease_terms: bool = False

    def __post_init__(self):
        if not self.name:
            raise ValidationError("category name must be non-empty")
        if not (0.0 < self.weight <= 1.0):
            raise ValidationError(f"category weight must be in (0, 1], got {self.weight}")
        if self.is_disease_terms and self.weight != DISEASE_TERMS_WEIGHT:
            raise ValidationError("the disease-terms category must carry weight 1")
        if len(self.member_queries) == 0:
            raise ValidationError(f"category {self.name!r} has no member queries")
        object.__setattr__(self, "member_queries", tuple(self.member_queries))


@dataclass(frozen=True)
class SymptomPanel:
    """Preprocessed per-category score inputs, split current vs historical."""

    category_names: tuple[str, ...]
    weights: np.ndarray
    current: np.ndarray  # (days x categories), values in [0, 1]
    historical: np.ndarray  # (days x categories)
    current_start: dt.date
    historical_start: dt.date
    disease_terms_index: int | None = None
    constant_categories: tuple[str, ...] = field(default=())

    def __post_init__(self):
        w = as_float_array(self.weights, "weights", ndim=1)
        cur = as_float_array(self.current, "current", ndim=2)
        hist = as_float_array(self.historical, "historical", ndim=2)
        k = len(self.category_names)
        if not (w.size == cur.shape[1] == hist.shape[1] == k):
            raise AlignmentError("category count mismatch across weights and matrices")
        if np.any(cur < 0) or np.any(hist < 0):
            raise ValidationError("panel entries must be non-negative after preprocessing")
        if np.any(w <= 0):
            raise ValidationError("all category weights must be positive")
        object.__setattr__(self, "category_names", tuple(self.category_names))
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "current", cur)
        object.__setattr__(self, "historical", hist)


@dataclass(frozen=True)
class BaselineBand:
    """Day-of-season mean trend with a +/- 2 sigma band across years."""

    mean_trend: TimeSeries
    upper: TimeSeries
    lower: TimeSeries
    n_years: int

    def __post_init__(self):
        if not (len(self.mean_trend) == len(self.upper) == len(self.lower)):
            raise AlignmentError("band components must share one span")
        if np.any(self.lower.values > self.mean_trend.values + 1e-12) or np.any(
            self.mean_trend.values > self.upper.values + 1e-12
        ):
            raise ValidationError("band must satisfy lower <= mean <= upper")


def aggregate_category(query_series: list[TimeSeries]) -> TimeSeries:
    """Total frequency across a category's member queries (element-wise sum)."""
    if len(query_series) == 0:
        raise ValidationError("a category needs at least one query series")
    first = query_series[0]
    total = np.array(first.values)
    for s in query_series[1:]:
        if s.start_date != first.start_date or len(s) != len(first):
            raise AlignmentError("member query series must share one span")
        total = total + s.values
    return TimeSeries(first.start_date, total)


def preprocess_category(s: TimeSeries, smoothing_window: int = 14) -> TimeSeries:
    """Smooth (trailing harmonic mean), detrend over the full span, min-max scale.

    Output values lie in [0, 1]; the span shrinks by the smoothing warm-up.
    A dead (constant) category comes back as all zeros.
    """
    smoothed = harmonic_smooth(s, smoothing_window)
    if len(smoothed) < 2:
        raise InsufficientHistoryError("too little data left after smoothing")
    detrended = linear_detrend(smoothed)
    # dead category: residual variation is pure rounding noise at this scale
    scale = max(1.0, float(np.abs(smoothed.values).max()))
    if float(np.ptp(detrended.values)) <= 1e-10 * scale:
        return detrended.with_values(np.zeros(len(detrended)))
    normalized, _ = min_max_normalize(detrended)
    return normalized


def weighted_score(X: np.ndarray, w: np.ndarray, start_date: dt.date) -> TimeSeries:
    """Per-day weighted average of category columns: X w / sum(w)."""
    X = as_float_array(X, "X", ndim=2)
    w = as_float_array(w, "w", ndim=1)
    if X.shape[1] != w.size:
        raise AlignmentError(f"X has {X.shape[1]} columns but w has {w.size} entries")
    if np.any(w < 0) or not np.any(w > 0):
        raise ValidationError("weights must be non-negative with at least one positive entry")
    return TimeSeries(start_date, X @ w / w.sum())


def _season_windows(series: TimeSeries, season_start: tuple[int, int]) -> list[np.ndarray]:
    """Split into 365-day windows starting at each season anniversary.

    Leap days (Feb 29) are dropped first so every window has 365 entries.
    """
    month, day = season_start
    keep, kept_dates = [], []
    date = series.start_date
    for v in series.values:
        if not (date.month == 2 and date.day == 29):
            keep.append(v)
            kept_dates.append(date)
        date += dt.timedelta(days=1)
    values = np.asarray(keep)
    starts = [i for i, d in enumerate(kept_dates) if (d.month, d.day) == (month, day)]
    windows = [values[i : i + 365] for i in starts if i + 365 <= len(values)]
    return windows


def historical_baseline(
    H: np.ndarray,
    w: np.ndarray,
    start_date: dt.date,
    season_start: tuple[int, int] = (9, 30),
) -> BaselineBand:
    """Average seasonal trend of the weighted historical score, +/- 2 sigma.

    The historical span must contain at least two complete seasonal years
    aligned to ``season_start``; sigma is the population value across years
    for each day of the season.
    """
    month, day = season_start
    if (month, day) == (2, 29):
        raise ValidationError("season cannot start on a leap day")
    dt.date(2021, month, day)  # validates the month/day pair
    h = weighted_score(H, w, start_date)
    windows = _season_windows(h, season_start)
    if len(windows) < 2:
        raise InsufficientHistoryError(
            f"need >= 2 complete seasonal years, found {len(windows)}"
        )
    stacked = np.vstack(windows)
    mean = stacked.mean(axis=0)
    sigma = stacked.std(axis=0)  # population sigma across years
    year = start_date.year if (start_date.month, start_date.day) <= (month, day) else start_date.year + 1
    first_start = dt.date(year, month, day)
    return BaselineBand(
        mean_trend=TimeSeries(first_start, mean),
        upper=TimeSeries(first_start, mean + 2.0 * sigma),
        lower=TimeSeries(first_start, mean - 2.0 * sigma),
        n_years=len(windows),
    )


def build_symptom_panel(
    query_series: dict[str, TimeSeries],
    categories: list[SymptomCategory],
    current_start: dt.date,
    smoothing_window: int = 14,
) -> SymptomPanel:
    """Aggregate, preprocess, and split raw per-query series into a panel.

    Preprocessing runs over each category's full span (historical plus
    current) before the split, so one detrend covers the whole analysis
    period.
    """
    if not categories:
        raise ValidationError("at least one category is required")
    disease_idx = None
    columns = []
    constant = []
    span = None
    for i, cat in enumerate(categories):
        missing = [q for q in cat.member_queries if q not in query_series]
        if missing:
            raise ValidationError(f"category {cat.name!r} references unknown queries {missing}")
        if cat.is_disease_terms:
            if disease_idx is not None:
                raise ValidationError("only one disease-terms category is allowed")
            disease_idx = i
        total = aggregate_category([query_series[q] for q in cat.member_queries])
        processed = preprocess_category(total, smoothing_window)
        if np.all(processed.values == 0.0):
            constant.append(cat.name)
        if span is None:
            span = (processed.start_date, len(processed))
        elif (processed.start_date, len(processed)) != span:
            raise AlignmentError("all categories must cover the same span")
        columns.append(processed.values)
    matrix = np.column_stack(columns)
    start, n = span
    split = (current_start - start).days
    if not 0 < split < n:
        raise InsufficientHistoryError(
            f"current_start {current_start} leaves no historical or no current data"
        )
    return SymptomPanel(
        category_names=tuple(c.name for c in categories),
        weights=np.array([c.weight for c in categories]),
        current=matrix[split:],
        historical=matrix[:split],
        current_start=current_start,
        historical_start=start,
        disease_terms_index=disease_idx,
        constant_categories=tuple(constant),
    )


def build_panel_scores(
    panel: SymptomPanel,
    include_disease_terms: bool = True,
    uniform_weights: bool = False,
    season_start: tuple[int, int] = (9, 30),
) -> tuple[TimeSeries, BaselineBand]:
    """Current-period weighted score plus the historical baseline band.

    ``include_disease_terms=False`` scores the symptom categories only;
    ``uniform_weights=True`` replaces the survey weights with equal ones.
    """
    cols = np.arange(len(panel.category_names))
    if not include_disease_terms and panel.disease_terms_index is not None:
        cols = cols[cols != panel.disease_terms_index]
    weights = np.ones(cols.size) if uniform_weights else panel.weights[cols]
    score = weighted_score(panel.current[:, cols], weights, panel.current_start)
    band = historical_baseline(
        panel.historical[:, cols], weights, panel.historical_start, season_start
    )
    return score, band
