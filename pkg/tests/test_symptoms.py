import datetime as dt

import numpy as np
import pytest

from episearch.errors import (
    AlignmentError,
    InsufficientHistoryError,
    ValidationError,
)
from episearch.symptoms import (
    SYMPTOM_OCCURRENCE_PROBABILITIES,
    BaselineBand,
    SymptomCategory,
    aggregate_category,
    build_panel_scores,
    build_symptom_panel,
    historical_baseline,
    preprocess_category,
    symptom_weights,
    weighted_score,
)
from episearch.timeseries import TimeSeries

D0 = dt.date(2020, 1, 1)


def ts(values, start=D0):
    return TimeSeries(start, np.asarray(values, dtype=float))


class TestWeightTable:
    def test_nineteen_symptoms(self):
        assert len(SYMPTOM_OCCURRENCE_PROBABILITIES) == 19

    def test_published_probabilities(self):
        w = symptom_weights()
        assert w["cough"] == 0.777
        assert w["fatigue"] == 0.709
        assert w["loss of smell"] == 0.291
        assert w["seizure"] == 0.008
        assert all(0.0 < p <= 1.0 for p in w.values())

    def test_copy_is_independent(self):
        w = symptom_weights()
        w["cough"] = 0.0
        assert SYMPTOM_OCCURRENCE_PROBABILITIES["cough"] == 0.777


class TestSymptomCategory:
    def test_zero_weight_rejected(self):
        with pytest.raises(ValidationError):
            SymptomCategory("cough", 0.0, ("cough",))

    def test_empty_queries_rejected(self):
        with pytest.raises(ValidationError):
            SymptomCategory("cough", 0.5, ())

    def test_disease_terms_weight_must_be_one(self):
        with pytest.raises(ValidationError):
            SymptomCategory("disease terms", 0.7, ("covid",), is_disease_terms=True)
        cat = SymptomCategory("disease terms", 1.0, ("covid",), is_disease_terms=True)
        assert cat.weight == 1.0


class TestAggregateCategory:
    def test_single_series_unchanged(self):
        s = ts([1.0, 2.0, 3.0])
        assert aggregate_category([s]) == s

    def test_elementwise_sum(self):
        out = aggregate_category([ts([1.0, 2.0]), ts([3.0, 4.0])])
        assert np.allclose(out.values, [4.0, 6.0])

    def test_linearity(self):
        s = ts(np.random.default_rng(0).uniform(size=20))
        out = aggregate_category([s] * 5)
        assert np.allclose(out.values, 5.0 * s.values)

    def test_span_mismatch(self):
        with pytest.raises(AlignmentError):
            aggregate_category([ts([1.0, 2.0]), ts([1.0, 2.0], start=dt.date(2020, 1, 2))])


class TestPreprocessCategory:
    def test_constant_becomes_zero(self):
        out = preprocess_category(ts([7.0] * 40))
        assert np.all(out.values == 0.0)

    def test_output_in_unit_interval(self):
        rng = np.random.default_rng(1)
        out = preprocess_category(ts(rng.uniform(0.0, 5.0, 120)))
        assert out.values.min() == 0.0
        assert out.values.max() == 1.0

    def test_order_matters_on_trending_series(self):
        # detrend-then-normalize differs from normalize-then-detrend when a trend exists
        from episearch.timeseries import harmonic_smooth, linear_detrend, min_max_normalize

        rng = np.random.default_rng(2)
        raw = ts(np.linspace(0.0, 10.0, 150) + rng.normal(0.0, 0.3, 150))
        ours = preprocess_category(raw)
        smoothed = harmonic_smooth(raw, 14)
        swapped = linear_detrend(min_max_normalize(smoothed)[0])
        assert not np.allclose(ours.values, swapped.values)

    def test_warm_up_shortens_span(self):
        out = preprocess_category(ts(np.arange(50.0)))
        assert len(out) == 50 - 13
        assert out.start_date == D0 + dt.timedelta(days=13)


class TestWeightedScore:
    def test_identity_matrix_hand_value(self):
        X = np.eye(2)
        w = np.array([0.777, 0.709])
        out = weighted_score(X, w, D0)
        total = 0.777 + 0.709
        assert np.allclose(out.values, [0.777 / total, 0.709 / total])
        assert out.values[0] == pytest.approx(0.5229, abs=5e-4)

    def test_uniform_weights_are_row_means(self):
        rng = np.random.default_rng(3)
        X = rng.uniform(size=(10, 4))
        out = weighted_score(X, np.ones(4), D0)
        assert np.allclose(out.values, X.mean(axis=1))

    def test_identical_columns_ignore_weights(self):
        col = np.random.default_rng(4).uniform(size=15)
        X = np.column_stack([col, col, col])
        out = weighted_score(X, np.array([0.1, 0.5, 0.9]), D0)
        assert np.allclose(out.values, col)

    def test_scale_equivariance(self):
        rng = np.random.default_rng(5)
        X = rng.uniform(size=(12, 3))
        w = rng.uniform(0.1, 1.0, 3)
        a = weighted_score(X, w, D0)
        b = weighted_score(X, 7.3 * w, D0)
        assert np.allclose(a.values, b.values)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(6)
        X = rng.uniform(size=(9, 4))
        w = rng.uniform(0.1, 1.0, 4)
        perm = rng.permutation(4)
        a = weighted_score(X, w, D0)
        b = weighted_score(X[:, perm], w[perm], D0)
        assert np.allclose(a.values, b.values)

    def test_zero_weights_rejected(self):
        with pytest.raises(ValidationError):
            weighted_score(np.ones((3, 2)), np.zeros(2), D0)

    def test_rowwise_bounds(self):
        rng = np.random.default_rng(7)
        X = rng.uniform(size=(20, 5))
        w = rng.uniform(0.05, 1.0, 5)
        out = weighted_score(X, w, D0)
        assert np.all(out.values <= X.max(axis=1) + 1e-12)
        assert np.all(out.values >= X.min(axis=1) - 1e-12)


def seasonal_matrix(year_values, start=dt.date(2011, 9, 30), season=(9, 30)):
    """One-column historical matrix, constant value per seasonal year."""
    values = []
    date = start
    year_idx = 0
    while True:
        if (date.month, date.day) == season and date != start:
            year_idx += 1
            if year_idx == len(year_values):
                break
        values.append(year_values[year_idx])
        date += dt.timedelta(days=1)
    return np.asarray(values, dtype=float)[:, None], start


class TestHistoricalBaseline:
    def test_identical_years_zero_band(self):
        H, start = seasonal_matrix([3.0] * 8)
        band = historical_baseline(H, np.array([1.0]), start)
        assert band.n_years == 8
        assert np.allclose(band.mean_trend.values, 3.0)
        assert np.allclose(band.upper.values, band.lower.values)

    def test_two_year_hand_value(self):
        H, start = seasonal_matrix([1.0, 3.0])
        band = historical_baseline(H, np.array([1.0]), start)
        assert band.n_years == 2
        assert np.allclose(band.mean_trend.values, 2.0)
        assert np.allclose(band.upper.values, 4.0)  # sigma = 1 (population)
        assert np.allclose(band.lower.values, 0.0)

    def test_mean_inside_band(self):
        rng = np.random.default_rng(8)
        H, start = seasonal_matrix(list(rng.uniform(1.0, 2.0, 5)))
        H = H + rng.normal(0.0, 0.05, H.shape)
        H = np.abs(H)
        band = historical_baseline(H, np.array([1.0]), start)
        assert np.all(band.lower.values <= band.mean_trend.values + 1e-12)
        assert np.all(band.mean_trend.values <= band.upper.values + 1e-12)

    def test_single_year_rejected(self):
        H, start = seasonal_matrix([2.0])
        with pytest.raises(InsufficientHistoryError):
            historical_baseline(H, np.array([1.0]), start)

    def test_band_start_is_first_season_anniversary(self):
        H, start = seasonal_matrix([1.0, 2.0])
        band = historical_baseline(H, np.array([1.0]), start)
        assert band.mean_trend.start_date == dt.date(2011, 9, 30)
        assert len(band.mean_trend) == 365


def synthetic_panel(seed=0, n_queries_per_cat=2, years=3, current_days=120):
    rng = np.random.default_rng(seed)
    raw_start = dt.date(2016, 9, 30) - dt.timedelta(days=13)
    current_start = dt.date(2016 + years, 9, 30)
    total_days = 13 + years * 365 + 2 + current_days  # +2 leap days margin
    end = raw_start + dt.timedelta(days=total_days)
    n = (end - raw_start).days
    categories = [
        SymptomCategory("fever", 0.601, tuple(f"fever_q{i}" for i in range(n_queries_per_cat))),
        SymptomCategory("cough", 0.777, tuple(f"cough_q{i}" for i in range(n_queries_per_cat))),
        SymptomCategory(
            "disease terms", 1.0, ("covid",), is_disease_terms=True
        ),
    ]
    series = {}
    for cat in categories:
        for q in cat.member_queries:
            base = rng.uniform(0.5, 2.0)
            series[q] = TimeSeries(raw_start, base + rng.normal(0.0, 0.1, n) ** 2)
    return series, categories, current_start


class TestBuildPanel:
    def test_panel_shapes(self):
        series, categories, current_start = synthetic_panel()
        panel = build_symptom_panel(series, categories, current_start)
        assert panel.category_names == ("fever", "cough", "disease terms")
        assert panel.disease_terms_index == 2
        assert panel.current.shape[1] == 3
        assert panel.current_start == current_start
        assert panel.historical.shape[0] + panel.current.shape[0] > 3 * 365

    def test_unknown_query_rejected(self):
        series, categories, current_start = synthetic_panel()
        bad = categories + [SymptomCategory("rash", 0.052, ("missing_query",))]
        with pytest.raises(ValidationError):
            build_symptom_panel(series, bad, current_start)

    def test_scores_and_band(self):
        series, categories, current_start = synthetic_panel()
        panel = build_symptom_panel(series, categories, current_start)
        score, band = build_panel_scores(panel)
        assert score.start_date == current_start
        assert len(score) == panel.current.shape[0]
        assert isinstance(band, BaselineBand)
        assert band.n_years >= 2

    def test_symptoms_only_mode_drops_disease_terms(self):
        series, categories, current_start = synthetic_panel()
        panel = build_symptom_panel(series, categories, current_start)
        with_terms, _ = build_panel_scores(panel, include_disease_terms=True)
        without, _ = build_panel_scores(panel, include_disease_terms=False)
        manual = weighted_score(
            panel.current[:, :2], panel.weights[:2], panel.current_start
        )
        assert np.allclose(without.values, manual.values)
        assert not np.allclose(with_terms.values, without.values)

    def test_uniform_mode_is_row_mean(self):
        series, categories, current_start = synthetic_panel()
        panel = build_symptom_panel(series, categories, current_start)
        score, _ = build_panel_scores(panel, uniform_weights=True)
        assert np.allclose(score.values, panel.current.mean(axis=1))
