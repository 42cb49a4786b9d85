"""Cross-country transfer of a source elastic-net ensemble.

Source models trained on one country's query space are deployed to a
target country by pairing each source query with the best-correlated
target query from the same symptom category (after a global temporal
alignment), rescaling the mapped columns, and ensembling the per-model
predictions into a mean trend with quantile bands.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass

import numpy as np

from .elasticnet import ElasticNet, RegularizationPath
from .errors import (
    AlignmentError,
    EnsembleEmptyError,
    InsufficientOverlapError,
    ValidationError,
)
from .timeseries import NormalizationParams, TimeSeries
from .validation import as_float_array, check_positive_int


def _shift_overlap(n_days: int, shift: int) -> tuple[int, int]:
    # rows [lo, hi) of the source compare against rows [lo+shift, hi+shift)
    return max(0, -shift), min(n_days, n_days - shift)


def _shifted_correlations(S: np.ndarray, T: np.ndarray, shift: int) -> np.ndarray | None:
    """(n_S x n_T) Pearson matrix on the shift-aligned overlap; nan if a
    column is constant there. None when the overlap is too short."""
    lo, hi = _shift_overlap(S.shape[0], shift)
    if hi - lo < 3:
        return None
    A = S[lo:hi]
    B = T[lo + shift : hi + shift]
    A = A - A.mean(axis=0)
    B = B - B.mean(axis=0)
    sa = np.sqrt((A * A).sum(axis=0))
    sb = np.sqrt((B * B).sum(axis=0))
    with np.errstate(divide="ignore", invalid="ignore"):
        corr = (A.T @ B) / np.outer(sa, sb)
    corr[:, sb == 0.0] = np.nan
    corr[sa == 0.0, :] = np.nan
    return np.clip(corr, -1.0, 1.0)


def _shift_candidates(max_shift: int):
    yield 0
    for k in range(1, max_shift + 1):
        yield -k
        yield k


def align_temporal(S_active: np.ndarray, T: np.ndarray, z: int) -> int:
    """Global shift in [-z, z] maximizing the mean best-pair correlation.

    For each candidate shift, every source column is matched to its
    best-correlated target column; the winning shift maximizes the mean of
    those correlations. Ties break toward the smallest absolute shift,
    then the negative one.
    """
    check_positive_int(z, "z", minimum=0)
    S_active = as_float_array(S_active, "S_active", ndim=2)
    T = as_float_array(T, "T", ndim=2)
    if S_active.shape[0] != T.shape[0]:
        raise AlignmentError("source and target matrices must cover the same days")
    if z == 0:
        return 0
    best_shift = None
    best_score = -np.inf
    for shift in _shift_candidates(z):
        corr = _shifted_correlations(S_active, T, shift)
        if corr is None:
            continue
        per_source = np.nanmax(corr, axis=1) if not np.all(np.isnan(corr)) else None
        if per_source is None or np.all(np.isnan(per_source)):
            continue
        score = float(np.nanmean(per_source))
        if score > best_score:
            best_score = score
            best_shift = shift
    if best_shift is None:
        raise InsufficientOverlapError(
            f"no shift within +/-{z} days leaves a usable overlap"
        )
    return best_shift


@dataclass(frozen=True)
class QueryPair:
    """One source query and its chosen target counterpart."""

    source: str
    target: str
    category: str
    r: float
    fallback: bool = False


@dataclass(frozen=True)
class QueryMapping:
    """Source-to-target query pairing plus the alignment shift behind it."""

    pairs: tuple[QueryPair, ...]
    global_shift: int
    target_columns: np.ndarray

    def __post_init__(self):
        if len(self.pairs) != len(self.target_columns):
            raise ValidationError("one target column per source query is required")
        cols = np.asarray(self.target_columns, dtype=int)
        cols.flags.writeable = False
        object.__setattr__(self, "target_columns", cols)
        object.__setattr__(self, "pairs", tuple(self.pairs))

    @property
    def fallback_pairs(self) -> tuple[QueryPair, ...]:
        return tuple(p for p in self.pairs if p.fallback)


def map_queries(
    S_active: np.ndarray,
    T: np.ndarray,
    source_categories: list[str],
    target_categories: list[str],
    shift: int,
    source_ids: list[str] | None = None,
    target_ids: list[str] | None = None,
) -> QueryMapping:
    """Pair each source query with the best-correlated same-category target.

    A category with no target queries falls back to the best correlate
    among all target queries; those pairs are flagged.
    """
    S_active = as_float_array(S_active, "S_active", ndim=2)
    T = as_float_array(T, "T", ndim=2)
    n_source = S_active.shape[1]
    n_target = T.shape[1]
    if n_target == 0:
        raise ValidationError("target query space is empty")
    if len(source_categories) != n_source or len(target_categories) != n_target:
        raise AlignmentError("category labels must cover every query column")
    source_ids = source_ids or [f"s{i}" for i in range(n_source)]
    target_ids = target_ids or [f"t{j}" for j in range(n_target)]
    corr = _shifted_correlations(S_active, T, shift)
    if corr is None:
        raise InsufficientOverlapError("overlap after the shift is too short")
    scores = np.where(np.isnan(corr), -np.inf, corr)
    by_category: dict[str, list[int]] = {}
    for j, cat in enumerate(target_categories):
        by_category.setdefault(cat, []).append(j)
    pairs = []
    columns = []
    for i, cat in enumerate(source_categories):
        candidates = by_category.get(cat, [])
        fallback = len(candidates) == 0
        pool = np.arange(n_target) if fallback else np.asarray(candidates)
        j = int(pool[np.argmax(scores[i, pool])])
        r = corr[i, j]
        pairs.append(
            QueryPair(source_ids[i], target_ids[j], cat, float(r) if np.isfinite(r) else float("nan"), fallback)
        )
        columns.append(j)
    return QueryMapping(tuple(pairs), shift, np.asarray(columns))


def scale_target(
    Z: np.ndarray, S_active: np.ndarray
) -> tuple[np.ndarray, np.ndarray, tuple[int, ...]]:
    """Rescale mapped target columns by the per-column source/target mean ratio.

    Returns the scaled matrix, the ratios, and the indices of zero-mean
    columns whose ratio was pinned at 1.
    """
    Z = as_float_array(Z, "Z", ndim=2)
    S_active = as_float_array(S_active, "S_active", ndim=2)
    if Z.shape[1] != S_active.shape[1]:
        raise AlignmentError("column counts must match between Z and the source")
    source_means = S_active.mean(axis=0)
    target_means = Z.mean(axis=0)
    flagged = tuple(int(j) for j in np.flatnonzero(target_means == 0.0))
    ratios = np.ones_like(target_means)
    ok = target_means != 0.0
    ratios[ok] = source_means[ok] / target_means[ok]
    return Z * ratios, ratios, flagged


@dataclass(frozen=True)
class SourceEnsemble:
    """Path models inside the sparsity band plus the target scaling params."""

    models: tuple[ElasticNet, ...]
    y_params: NormalizationParams

    def __post_init__(self):
        if len(self.models) == 0:
            raise EnsembleEmptyError("ensemble must hold at least one model")
        object.__setattr__(self, "models", tuple(self.models))

    def __len__(self):
        return len(self.models)


def select_ensemble(
    path: RegularizationPath,
    min_active: int,
    max_active: int,
    y_params: NormalizationParams,
) -> SourceEnsemble:
    """Keep path models whose active feature count falls inside the band."""
    check_positive_int(min_active, "min_active", minimum=1)
    if max_active < min_active:
        raise ValidationError("max_active must be >= min_active")
    kept = tuple(m for m in path.models if min_active <= m.active_count_ <= max_active)
    if not kept:
        raise EnsembleEmptyError(
            f"no path model has between {min_active} and {max_active} active queries"
        )
    return SourceEnsemble(kept, y_params)


@dataclass(frozen=True)
class TransferEstimate:
    """Ensemble mean with 2.5%/97.5% quantile bands, one value per day."""

    mean: TimeSeries
    lower: TimeSeries
    upper: TimeSeries
    ensemble_size: int

    def __post_init__(self):
        if not (len(self.mean) == len(self.lower) == len(self.upper)):
            raise AlignmentError("estimate components must share one span")
        if self.ensemble_size < 1:
            raise ValidationError("ensemble_size must be >= 1")
        if np.any(self.lower.values > self.mean.values + 1e-12) or np.any(
            self.mean.values > self.upper.values + 1e-12
        ):
            raise ValidationError("bands must satisfy lower <= mean <= upper")


def infer(ensemble: SourceEnsemble, Z_S: np.ndarray, start_date: dt.date) -> TransferEstimate:
    """Ensemble predictions on the mapped target space, denormalized.

    Each model's output is mapped back to the source ground-truth scale;
    the band uses linear-interpolation quantiles across models per day.
    """
    Z_S = as_float_array(Z_S, "Z_S", ndim=2)
    preds = np.stack([m.predict(Z_S) for m in ensemble.models])
    span = ensemble.y_params.max - ensemble.y_params.min
    preds = preds * span + ensemble.y_params.min
    mean = preds.mean(axis=0)
    lower = np.quantile(preds, 0.025, axis=0)
    upper = np.quantile(preds, 0.975, axis=0)
    return TransferEstimate(
        mean=TimeSeries(start_date, mean),
        lower=TimeSeries(start_date, np.minimum(lower, mean)),
        upper=TimeSeries(start_date, np.maximum(upper, mean)),
        ensemble_size=len(ensemble),
    )


@dataclass(frozen=True)
class ShiftProfile:
    """Distribution of per-model best alignment shifts."""

    shifts: np.ndarray
    mean: float
    ci_lower: float
    ci_upper: float

    def __post_init__(self):
        arr = np.asarray(self.shifts, dtype=float)
        arr.flags.writeable = False
        object.__setattr__(self, "shifts", arr)
        if not (self.ci_lower <= self.mean <= self.ci_upper):
            raise ValidationError("interval must contain the mean")


def per_model_shift_profile(
    ensemble: SourceEnsemble, S: np.ndarray, T: np.ndarray, z: int
) -> ShiftProfile:
    """Best shift per ensemble model, restricted to its active queries,
    with a 95% normal-approximation interval around the mean."""
    S = as_float_array(S, "S", ndim=2)
    shifts = []
    for model in ensemble.models:
        active = np.flatnonzero(model.coef_)
        shifts.append(align_temporal(S[:, active], T, z))
    arr = np.asarray(shifts, dtype=float)
    mean = float(arr.mean())
    if arr.size > 1:
        sd = float(arr.std(ddof=1))
        half = 1.96 * sd / np.sqrt(arr.size)
    else:
        half = 0.0
    return ShiftProfile(arr, mean, mean - half, mean + half)
