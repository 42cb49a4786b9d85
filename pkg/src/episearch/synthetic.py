"""Synthetic country datasets with planted ground truth.

The real inputs (query frequencies, news coverage) are proprietary, so
tests and demos run on generated data: a logistic-growth infection wave
drives symptom-category query frequencies (with per-symptom delays), the
news ratio couples concern into the same frequencies, and clinical series
lag the infection curve by known amounts. Every planted quantity is
recorded so oracles can check recovery.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ValidationError
from .io import CountryDataset, NewsCounts
from .symptoms import (
    DISEASE_TERMS_CATEGORY,
    SYMPTOM_OCCURRENCE_PROBABILITIES,
    SymptomCategory,
)
from .timeseries import TimeSeries


@dataclass(frozen=True)
class SyntheticScenario:
    """Fully seeded recipe for one country's generated data."""

    seed: int = 0
    country: str = "AA"
    current_start: dt.date = dt.date(2019, 9, 30)
    current_days: int = 300
    history_years: int = 3
    peak_day: int = 160  # offset into the current period
    growth_scale: float = 15.0
    beta: float = 0.3  # concern coupling of news into query frequencies
    noise_scale: float = 0.02
    case_lag: int = 14  # search-to-outcome reporting lags
    death_lag: int = 21
    case_scale: float = 2000.0
    death_scale: float = 120.0
    queries_per_category: int = 2

    def __post_init__(self):
        if self.current_days < 60:
            raise ValidationError("current period must cover at least 60 days")
        if self.history_years < 2:
            raise ValidationError("history must cover at least 2 seasonal years")
        if self.queries_per_category < 1:
            raise ValidationError("each category needs at least one query")
        if not 0 <= self.peak_day < self.current_days:
            raise ValidationError("peak_day must fall inside the current period")


@dataclass(frozen=True)
class PlantedTruth:
    """Ground truth recorded alongside generated data."""

    infection: TimeSeries  # current-period intensity, peak height 1
    beta: float
    case_lag: int
    death_lag: int
    symptom_delays: dict[str, int] = field(default_factory=dict)


def logistic_wave(t: np.ndarray, peak: float, scale: float) -> np.ndarray:
    """Logistic-growth epidemic intensity, normalized to peak at 1."""
    u = (np.asarray(t, dtype=float) - peak) / scale
    e = np.exp(-np.abs(u))
    # 4 e^-u / (1+e^-u)^2 written stably for both signs of u
    return 4.0 * e / (1.0 + e) ** 2


def default_categories(queries_per_category: int) -> tuple[SymptomCategory, ...]:
    """Symptom categories with survey weights plus the disease-terms set."""
    categories = [
        SymptomCategory(
            name=name,
            weight=weight,
            member_queries=tuple(
                f"{name.replace(' ', '_')}_q{i}" for i in range(queries_per_category)
            ),
        )
        for name, weight in SYMPTOM_OCCURRENCE_PROBABILITIES.items()
    ]
    categories.append(
        SymptomCategory(
            name=DISEASE_TERMS_CATEGORY,
            weight=1.0,
            member_queries=tuple(f"disease_q{i}" for i in range(queries_per_category)),
            is_disease_terms=True,
        )
    )
    return tuple(categories)


def _first_season_start(scenario: SyntheticScenario) -> dt.date:
    start = scenario.current_start
    return dt.date(start.year - scenario.history_years, start.month, start.day)


def generate_synthetic(scenario: SyntheticScenario) -> CountryDataset:
    """Build one country's dataset; identical seeds give identical data."""
    rng = np.random.default_rng(scenario.seed)
    categories = default_categories(scenario.queries_per_category)

    # raw span: smoothing warm-up before the first seasonal year, then history,
    # then the current period
    raw_start = _first_season_start(scenario) - dt.timedelta(days=13)
    current_end = scenario.current_start + dt.timedelta(days=scenario.current_days - 1)
    n_total = (current_end - raw_start).days + 1
    current_offset = (scenario.current_start - raw_start).days
    dates = [raw_start + dt.timedelta(days=i) for i in range(n_total)]
    day_of_year = np.array([d.timetuple().tm_yday for d in dates], dtype=float)

    # infection intensity: zero through history, a logistic wave in the
    # current period
    t_current = np.arange(scenario.current_days, dtype=float)
    wave = logistic_wave(t_current, scenario.peak_day, scenario.growth_scale)
    infection_full = np.zeros(n_total)
    infection_full[current_offset:] = wave

    def delayed_wave(lag: int) -> np.ndarray:
        shifted = logistic_wave(t_current - lag, scenario.peak_day, scenario.growth_scale)
        out = np.zeros(n_total)
        out[current_offset:] = shifted
        return out

    # news coverage: tracks the outbreak slightly ahead of the query signal,
    # plus independent newsroom noise
    news_total = rng.integers(8000, 12000, scenario.current_days)
    coverage = 0.65 * logistic_wave(t_current + 5.0, scenario.peak_day, scenario.growth_scale)
    coverage = coverage + 0.05 * np.abs(rng.normal(0.0, 1.0, scenario.current_days))
    coverage = np.clip(coverage + 0.01, 0.0, 0.95)
    news_matched = np.minimum(np.round(coverage * news_total), news_total).astype(np.int64)
    news = NewsCounts(scenario.current_start, news_matched, news_total)

    queries: dict[str, TimeSeries] = {}
    symptom_delays: dict[str, int] = {}
    news_full = np.zeros(n_total)
    news_full[current_offset:] = news_matched / news_total
    for category in categories:
        delay = int(rng.integers(0, 4))
        symptom_delays[category.name] = delay
        concern = 1.5 if category.is_disease_terms else float(rng.uniform(0.4, 1.0))
        infection_part = 3.0 * category.weight * delayed_wave(delay)
        for query in category.member_queries:
            base = float(rng.uniform(0.5, 2.0))
            phase = float(rng.uniform(0.0, 365.0))
            seasonal = base * (1.0 + 0.1 * np.sin(2.0 * np.pi * (day_of_year - phase) / 365.0))
            share = float(rng.uniform(0.6, 1.4))
            values = (
                seasonal
                + share * infection_part
                + scenario.beta * concern * news_full
                + rng.normal(0.0, scenario.noise_scale, n_total)
            )
            queries[query] = TimeSeries(raw_start, np.maximum(values, 0.0))

    case_noise = rng.normal(0.0, 0.01 * scenario.case_scale, scenario.current_days)
    cases = np.maximum(
        np.round(scenario.case_scale * delayed_wave(scenario.case_lag)[current_offset:] + case_noise),
        0.0,
    )
    death_noise = rng.normal(0.0, 0.01 * scenario.death_scale, scenario.current_days)
    deaths = np.maximum(
        np.round(scenario.death_scale * delayed_wave(scenario.death_lag)[current_offset:] + death_noise),
        0.0,
    )

    planted = PlantedTruth(
        infection=TimeSeries(scenario.current_start, wave),
        beta=scenario.beta,
        case_lag=scenario.case_lag,
        death_lag=scenario.death_lag,
        symptom_delays=symptom_delays,
    )
    return CountryDataset(
        country=scenario.country,
        queries=queries,
        cases=TimeSeries(scenario.current_start, cases),
        deaths=TimeSeries(scenario.current_start, deaths),
        news=news,
        categories=categories,
        planted=planted,
    )


def generate_countries(
    base: SyntheticScenario, countries: list[str]
) -> list[CountryDataset]:
    """One dataset per country, seeded from the base scenario seed."""
    datasets = []
    for i, code in enumerate(countries):
        scenario = replace(base, country=code, seed=base.seed + 1000 * i)
        datasets.append(generate_synthetic(scenario))
    return datasets
