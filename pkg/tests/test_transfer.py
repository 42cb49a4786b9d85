import datetime as dt

import numpy as np
import pytest

from episearch.elasticnet import fit_path
from episearch.errors import (
    AlignmentError,
    EnsembleEmptyError,
    ValidationError,
)
from episearch.timeseries import NormalizationParams, normalize_array, smooth_columns, z_score
from episearch.transfer import (
    QueryMapping,
    align_temporal,
    infer,
    map_queries,
    per_model_shift_profile,
    scale_target,
    select_ensemble,
)

D0 = dt.date(2020, 2, 1)


def smooth_walk_matrix(seed, n_days, n_cols, margin=0):
    """Columns are smooth random walks; margin rows allow delayed copies."""
    rng = np.random.default_rng(seed)
    total = n_days + 2 * margin
    steps = rng.normal(0.0, 1.0, (total, n_cols))
    walks = np.cumsum(steps, axis=0)
    return walks, margin


def delayed_matrix(walks, margin, n_days, delay):
    return walks[margin - delay : margin - delay + n_days]


class TestAlignTemporal:
    def test_zero_window_forces_zero(self):
        S = np.random.default_rng(0).uniform(size=(30, 3))
        assert align_temporal(S, S, 0) == 0

    def test_identity_alignment(self):
        walks, margin = smooth_walk_matrix(1, 100, 4)
        S = walks[:100]
        assert align_temporal(S, S, 45) == 0

    @pytest.mark.parametrize("delay", [10, -7, 45])
    def test_planted_delay_recovered(self, delay):
        walks, margin = smooth_walk_matrix(2, 200, 5, margin=50)
        S = walks[margin : margin + 200]
        T = delayed_matrix(walks, margin, 200, delay)
        assert align_temporal(S, T, 45) == delay

    def test_day_count_mismatch(self):
        with pytest.raises(AlignmentError):
            align_temporal(np.ones((10, 2)), np.ones((11, 2)), 5)


class TestMapQueries:
    def test_single_target_per_category(self):
        rng = np.random.default_rng(3)
        S = rng.uniform(size=(40, 2))
        T = rng.uniform(size=(40, 2))
        mapping = map_queries(S, T, ["a", "b"], ["a", "b"], 0)
        assert [p.target for p in mapping.pairs] == ["t0", "t1"]
        assert not mapping.fallback_pairs

    def test_planted_noisy_copy_preferred(self):
        chosen = 0
        for seed in range(50):
            rng = np.random.default_rng(seed)
            walks, _ = smooth_walk_matrix(seed + 500, 120, 1)
            source = walks[:120, 0]
            copies = source + rng.normal(0.0, 0.3, 120)
            noise = rng.normal(0.0, 1.0, (120, 3)).cumsum(axis=0)
            T = np.column_stack([noise[:, 0], copies, noise[:, 1], noise[:, 2]])
            mapping = map_queries(
                source[:, None], T, ["a"], ["a", "a", "a", "a"], 0
            )
            if mapping.pairs[0].target == "t1":
                chosen += 1
        assert chosen >= 48  # >= 95% of 50 seeds

    def test_empty_category_falls_back_global(self):
        rng = np.random.default_rng(4)
        S = rng.uniform(size=(40, 2))
        T = rng.uniform(size=(40, 3))
        mapping = map_queries(S, T, ["a", "zzz"], ["a", "a", "b"], 0)
        assert mapping.pairs[1].fallback
        assert len(mapping.fallback_pairs) == 1

    def test_empty_target_space_rejected(self):
        with pytest.raises(ValidationError):
            map_queries(np.ones((10, 1)), np.ones((10, 0)), ["a"], [], 0)

    def test_duplicate_targets_allowed(self):
        rng = np.random.default_rng(5)
        base = rng.uniform(size=40)
        S = np.column_stack([base, base + rng.normal(0, 0.01, 40)])
        T = base[:, None]
        mapping = map_queries(S, T, ["a", "a"], ["a"], 0)
        assert [p.target for p in mapping.pairs] == ["t0", "t0"]
        assert np.array_equal(mapping.target_columns, [0, 0])


class TestScaleTarget:
    def test_identity_when_equal(self):
        Z = np.random.default_rng(6).uniform(size=(30, 4))
        scaled, ratios, flagged = scale_target(Z, Z)
        assert np.allclose(scaled, Z)
        assert np.allclose(ratios, 1.0)
        assert flagged == ()

    def test_half_scale_ratio_two(self):
        S = np.random.default_rng(7).uniform(0.5, 1.0, size=(30, 2))
        Z = 0.5 * S
        scaled, ratios, _ = scale_target(Z, S)
        assert np.allclose(ratios, 2.0)
        assert np.allclose(scaled.mean(axis=0), S.mean(axis=0))

    def test_zero_mean_column_flagged(self):
        S = np.random.default_rng(8).uniform(size=(20, 2))
        Z = np.column_stack([S[:, 0], np.zeros(20)])
        scaled, ratios, flagged = scale_target(Z, S)
        assert flagged == (1,)
        assert ratios[1] == 1.0
        assert np.allclose(scaled[:, 1], 0.0)


def fitted_path(seed=9, n=80, p=6, q=40):
    rng = np.random.default_rng(seed)
    X = rng.uniform(0.0, 1.0, (n, p))
    w = rng.normal(0.0, 1.0, p)
    y_raw = X @ w + rng.normal(0.0, 0.05, n)
    y, params = normalize_array(y_raw)
    path = fit_path(X, y, q=q)
    return X, y, params, path


class TestSelectEnsemble:
    def test_band_filter(self):
        X, y, params, path = fitted_path()
        ensemble = select_ensemble(path, 2, 5, params)
        for model in ensemble.models:
            assert 2 <= model.active_count_ <= 5

    def test_full_band_keeps_everything_active(self):
        X, y, params, path = fitted_path()
        ensemble = select_ensemble(path, 1, X.shape[1], params)
        assert len(ensemble) == sum(1 for m in path.models if m.active_count_ >= 1)

    def test_impossible_band_raises(self):
        X, y, params, path = fitted_path()
        with pytest.raises(EnsembleEmptyError):
            select_ensemble(path, X.shape[1] + 1, X.shape[1] + 2, params)


class TestInfer:
    def test_identical_models_zero_width(self):
        X, y, params, path = fitted_path()
        ensemble = select_ensemble(path, 1, X.shape[1], params)
        single = type(ensemble)((ensemble.models[0],) * 5, params)
        estimate = infer(single, X, D0)
        assert np.allclose(estimate.lower.values, estimate.mean.values)
        assert np.allclose(estimate.upper.values, estimate.mean.values)

    def test_three_constant_models_quantile_rule(self):
        from episearch.elasticnet import ElasticNet

        models = []
        for b in (1.0, 2.0, 3.0):
            m = ElasticNet(lambda1=1.0, lambda2=1.0)
            m.coef_ = np.zeros(2)
            m.intercept_ = b
            models.append(m)
        from episearch.transfer import SourceEnsemble

        ensemble = SourceEnsemble(tuple(models), NormalizationParams(0.0, 1.0))
        estimate = infer(ensemble, np.zeros((4, 2)), D0)
        assert np.allclose(estimate.mean.values, 2.0)
        assert np.allclose(estimate.lower.values, 1.05)
        assert np.allclose(estimate.upper.values, 2.95)

    def test_member_order_equivariance(self):
        X, y, params, path = fitted_path(seed=10)
        ensemble = select_ensemble(path, 1, X.shape[1], params)
        reversed_ensemble = type(ensemble)(tuple(reversed(ensemble.models)), params)
        a = infer(ensemble, X, D0)
        b = infer(reversed_ensemble, X, D0)
        assert np.allclose(a.mean.values, b.mean.values)
        assert np.allclose(a.lower.values, b.lower.values)
        assert np.allclose(a.upper.values, b.upper.values)

    def test_band_ordering_invariant(self):
        X, y, params, path = fitted_path(seed=11)
        ensemble = select_ensemble(path, 1, X.shape[1], params)
        estimate = infer(ensemble, X, D0)
        assert np.all(estimate.lower.values <= estimate.mean.values + 1e-12)
        assert np.all(estimate.mean.values <= estimate.upper.values + 1e-12)


class TestSelfTransferIdentity:
    def test_source_to_self_reproduces_path_predictions(self):
        rng = np.random.default_rng(12)
        n_days, n_queries = 120, 6
        t = np.arange(n_days + 13)[:, None]
        phases = rng.uniform(0.0, 2 * np.pi, n_queries)
        raw = 1.0 + 0.5 * np.sin(t / 9.0 + phases) + rng.normal(0.0, 0.2, (n_days + 13, n_queries))
        smoothed = smooth_columns(raw, 14)
        S_norm = np.column_stack([normalize_array(smoothed[:, j])[0] for j in range(n_queries)])
        y_raw = smoothed @ rng.uniform(0.2, 1.0, n_queries)
        y_norm, y_params = normalize_array(y_raw)
        path = fit_path(S_norm, y_norm, q=30)
        ensemble = select_ensemble(path, 1, n_queries, y_params)

        categories = ["a", "a", "b", "b", "c", "c"]
        active_union = sorted({j for m in ensemble.models for j in np.flatnonzero(m.coef_)})
        shift = align_temporal(smoothed[:, active_union], smoothed, 45)
        assert shift == 0
        mapping = map_queries(smoothed, smoothed, categories, categories, shift)
        assert np.array_equal(mapping.target_columns, np.arange(n_queries))
        Z = np.column_stack(
            [normalize_array(smoothed[:, j])[0] for j in mapping.target_columns]
        )
        Z_scaled, ratios, _ = scale_target(Z, S_norm)
        assert np.allclose(ratios, 1.0)
        estimate = infer(ensemble, Z_scaled, D0)

        direct = np.stack([m.predict(S_norm) for m in ensemble.models])
        direct = direct * (y_params.max - y_params.min) + y_params.min
        assert np.allclose(estimate.mean.values, direct.mean(axis=0), atol=1e-10)


class TestShiftProfile:
    def test_full_query_models_share_global_shift(self):
        walks, margin = smooth_walk_matrix(13, 150, 4, margin=50)
        S = walks[margin : margin + 150]
        T = delayed_matrix(walks, margin, 150, 9)
        rng = np.random.default_rng(14)
        y, params = normalize_array(S @ rng.uniform(0.5, 1.0, 4))
        S_norm = np.column_stack([normalize_array(S[:, j])[0] for j in range(4)])
        path = fit_path(S_norm, y, q=25)
        ensemble = select_ensemble(path, 1, 4, params)
        profile = per_model_shift_profile(ensemble, S, T, 20)
        assert profile.ci_lower <= profile.mean <= profile.ci_upper
        assert profile.mean == pytest.approx(9.0, abs=1.0)

    def test_planted_delay_tight_interval(self):
        walks, margin = smooth_walk_matrix(15, 150, 5, margin=50)
        S = walks[margin : margin + 150]
        T = delayed_matrix(walks, margin, 150, 6)
        rng = np.random.default_rng(16)
        y, params = normalize_array(S @ rng.uniform(0.5, 1.0, 5))
        S_norm = np.column_stack([normalize_array(S[:, j])[0] for j in range(5)])
        path = fit_path(S_norm, y, q=25)
        ensemble = select_ensemble(path, 1, 5, params)
        profile = per_model_shift_profile(ensemble, S, T, 20)
        assert profile.mean == pytest.approx(6.0, abs=1e-9)
        assert profile.ci_upper - profile.ci_lower == pytest.approx(0.0, abs=1e-9)


class TestStandardizedTrendInvariance:
    def test_z_scored_mean_ignores_denormalization(self):
        X, y, params, path = fitted_path(seed=17)
        ensemble = select_ensemble(path, 1, X.shape[1], params)
        other = type(ensemble)(ensemble.models, NormalizationParams(5.0, 25.0))
        a = infer(ensemble, X, D0)
        b = infer(other, X, D0)
        za = z_score(a.mean)
        zb = z_score(b.mean)
        assert np.allclose(za.values, zb.values, atol=1e-10)
