"""Multi-country query-impact analysis.

Per-country query panels and clinical targets are min-max normalized
independently, stacked, and examined two ways: simple per-query shifted
correlations against the pooled target, and a regression analysis that
walks the elastic-net path day by day, picks the most accurate model at
each feature-density level, and accumulates each query's normalized
frequency-times-weight contribution to the estimates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .elasticnet import ElasticNet, fit_path
from .errors import (
    AlignmentError,
    ConvergenceError,
    DegenerateInputError,
    ValidationError,
)
from .timeseries import normalize_array
from .validation import as_float_array, check_positive_int


@dataclass(frozen=True)
class AggregatedPanel:
    """Stacked per-country normalized query matrices and targets.

    Rows are country-major: the block for country c occupies rows
    [c * n_days, (c + 1) * n_days).
    """

    Z: np.ndarray
    y: np.ndarray
    countries: tuple[str, ...]
    query_ids: tuple[str, ...]
    n_days: int
    constant_columns: tuple[tuple[str, str], ...] = field(default=())

    def __post_init__(self):
        Z = as_float_array(self.Z, "Z", ndim=2)
        y = as_float_array(self.y, "y", ndim=1)
        expected = len(self.countries) * self.n_days
        if Z.shape != (expected, len(self.query_ids)) or y.shape != (expected,):
            raise AlignmentError("panel shapes do not match countries x days x queries")
        object.__setattr__(self, "Z", Z)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "countries", tuple(self.countries))
        object.__setattr__(self, "query_ids", tuple(self.query_ids))

    def country_block(self, c: int) -> slice:
        return slice(c * self.n_days, (c + 1) * self.n_days)


def aggregate_countries(
    query_matrices: dict[str, np.ndarray],
    targets: dict[str, np.ndarray],
    query_ids: list[str],
) -> AggregatedPanel:
    """Normalize each country's columns and target, then row-stack them.

    Every country must supply the same query vocabulary over the same
    number of days. Constant columns normalize to zero and are recorded.
    """
    if set(query_matrices) != set(targets):
        raise AlignmentError("query matrices and targets must cover the same countries")
    if not query_matrices:
        raise ValidationError("at least one country is required")
    countries = tuple(sorted(query_matrices))
    n_days = None
    blocks, target_blocks, constants = [], [], []
    for country in countries:
        Z = as_float_array(query_matrices[country], f"queries[{country}]", ndim=2)
        y = as_float_array(targets[country], f"target[{country}]", ndim=1)
        if Z.shape[1] != len(query_ids):
            raise AlignmentError(
                f"{country} has {Z.shape[1]} query columns, expected {len(query_ids)}"
            )
        if Z.shape[0] != y.size:
            raise AlignmentError(f"{country}: day counts differ between queries and target")
        if n_days is None:
            n_days = Z.shape[0]
        elif Z.shape[0] != n_days:
            raise AlignmentError("all countries must cover the same number of days")
        normalized = np.empty_like(Z)
        for j in range(Z.shape[1]):
            normalized[:, j], params = normalize_array(Z[:, j])
            if params.constant:
                constants.append((country, query_ids[j]))
        y_norm, _ = normalize_array(y)
        blocks.append(normalized)
        target_blocks.append(y_norm)
    return AggregatedPanel(
        Z=np.vstack(blocks),
        y=np.concatenate(target_blocks),
        countries=countries,
        query_ids=tuple(query_ids),
        n_days=n_days,
        constant_columns=tuple(constants),
    )


@dataclass(frozen=True)
class FeatureCorrelation:
    query: str
    r: float  # nan when undefined
    rank: int
    degenerate: bool = False


def correlate_features(
    panel: AggregatedPanel,
    shift: int = 0,
    per_country_shifts: dict[str, int] | None = None,
) -> list[FeatureCorrelation]:
    """Per-query Pearson correlation against the pooled shifted target.

    A positive shift compares each day's frequency with the target
    ``shift`` days later, within each country block. Undefined (constant)
    queries rank last and are flagged; ties break by query id.
    """
    shifts = {c: shift for c in panel.countries}
    if per_country_shifts:
        unknown = set(per_country_shifts) - set(panel.countries)
        if unknown:
            raise ValidationError(f"shifts given for unknown countries {sorted(unknown)}")
        shifts.update(per_country_shifts)
    rows, target = [], []
    for c, country in enumerate(panel.countries):
        s = shifts[country]
        block = panel.country_block(c)
        Z = panel.Z[block]
        y = panel.y[block]
        lo, hi = max(0, -s), min(panel.n_days, panel.n_days - s)
        if hi - lo < 3:
            raise AlignmentError(
                f"shift {s} leaves fewer than 3 overlapping days for {country}"
            )
        rows.append(Z[lo:hi])
        target.append(y[lo + s : hi + s])
    Z = np.vstack(rows)
    y = np.concatenate(target)
    yc = y - y.mean()
    sy = np.sqrt((yc * yc).sum())
    Zc = Z - Z.mean(axis=0)
    sz = np.sqrt((Zc * Zc).sum(axis=0))
    with np.errstate(divide="ignore", invalid="ignore"):
        r = (Zc.T @ yc) / (sz * sy)
    if sy == 0.0:
        r[:] = np.nan
    r[sz == 0.0] = np.nan
    r = np.clip(r, -1.0, 1.0)
    order = sorted(
        range(len(panel.query_ids)),
        key=lambda j: (np.isnan(r[j]), -(r[j] if not np.isnan(r[j]) else 0.0), panel.query_ids[j]),
    )
    result = []
    for rank, j in enumerate(order, start=1):
        degenerate = bool(np.isnan(r[j]))
        result.append(
            FeatureCorrelation(panel.query_ids[j], float(r[j]), rank, degenerate)
        )
    return result


@dataclass(frozen=True)
class LevelRecord:
    """Bookkeeping for one (density level, test day) model selection."""

    level_target: int
    day: int
    lambda1: float
    active_count: int
    weights: np.ndarray
    intercept: float
    frequencies: np.ndarray  # (countries x queries) test rows
    estimates: np.ndarray  # (countries,)


@dataclass(frozen=True)
class ImpactReport:
    """Normalized per-query impact plus the records behind the sums."""

    theta: dict[str, float]
    ranking: tuple[str, ...]  # descending impact
    records: tuple[LevelRecord, ...]
    skipped_days: tuple[int, ...]
    denominator: float
    denominator_nonpositive: bool

    def positive_queries(self) -> list[str]:
        return [q for q in self.ranking if self.theta[q] > 0]

    def negative_queries(self) -> list[str]:
        return [q for q in reversed(self.ranking) if self.theta[q] < 0]


def density_targets(n_features: int, max_density: float, levels: int) -> list[int]:
    """Integer active-feature targets from 1% up to ``max_density`` of n."""
    check_positive_int(levels, "levels")
    if not 0.0 < max_density <= 1.0:
        raise ValidationError("max_density must lie in (0, 1]")
    percents = np.linspace(0.01, max_density, levels)
    return [max(1, int(round(p * n_features))) for p in percents]


def _select_at_level(path, target: int, X_test, y_test) -> ElasticNet:
    """Model whose active count is closest to the target; break ties by
    test MSE, then by smaller lambda1 (the more converged fit)."""
    counts = path.active_counts()
    distance = np.abs(counts - target)
    candidates = np.flatnonzero(distance == distance.min())

    def key(idx):
        model = path.models[idx]
        err = model.predict(X_test) - y_test
        return (float(err @ err) / y_test.size, model.lambda1)

    return path.models[min(candidates, key=key)]


def impact_analysis(
    panel: AggregatedPanel,
    test_days: int,
    max_density: float = 0.5,
    density_levels: int = 10,
    path_size: int = 100,
    lambda_ratio: float = 0.5,
) -> ImpactReport:
    """Accumulated frequency-times-weight impact of each query.

    For each of the last ``test_days`` days a path is trained on all prior
    days and scored on that day's rows (one per country); at each density
    level the most accurate model contributes every query's frequency *
    weight to the numerator and its estimates to the shared denominator.
    """
    check_positive_int(test_days, "test_days")
    M = panel.n_days
    if M < test_days + 2:
        raise ValidationError(
            f"need at least test_days+2 = {test_days + 2} days, got {M}"
        )
    n = len(panel.query_ids)
    C = len(panel.countries)
    targets = density_targets(n, max_density, density_levels)
    day_index = np.tile(np.arange(M), C)

    records = []
    skipped = []
    for day in range(M - test_days, M):
        train = day_index < day
        test = day_index == day
        try:
            path = fit_path(
                panel.Z[train], panel.y[train], q=path_size, lambda_ratio=lambda_ratio
            )
        except (DegenerateInputError, ConvergenceError):
            skipped.append(day)
            continue
        X_test = panel.Z[test]
        y_test = panel.y[test]
        for target in targets:
            model = _select_at_level(path, target, X_test, y_test)
            records.append(
                LevelRecord(
                    level_target=target,
                    day=day,
                    lambda1=model.lambda1,
                    active_count=model.active_count_,
                    weights=model.coef_.copy(),
                    intercept=model.intercept_,
                    frequencies=X_test.copy(),
                    estimates=model.predict(X_test),
                )
            )
    numerators = np.zeros(n)
    denominator = 0.0
    for rec in records:
        numerators += rec.frequencies.sum(axis=0) * rec.weights
        denominator += float(rec.estimates.sum())
    if denominator == 0.0:
        theta_values = np.zeros(n)
    else:
        theta_values = numerators / denominator
    theta = {q: float(v) for q, v in zip(panel.query_ids, theta_values)}
    ranking = tuple(sorted(panel.query_ids, key=lambda q: (-theta[q], q)))
    return ImpactReport(
        theta=theta,
        ranking=ranking,
        records=tuple(records),
        skipped_days=tuple(skipped),
        denominator=denominator,
        denominator_nonpositive=denominator <= 0.0,
    )
