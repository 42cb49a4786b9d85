"""Disease-activity tracking from online-search frequency time series."""

from .elasticnet import ElasticNet, RegularizationPath, fit_path, lambda_max
from .errors import (
    AlignmentError,
    ConvergenceError,
    DegenerateInputError,
    EnsembleEmptyError,
    IngestionError,
    InsufficientHistoryError,
    InsufficientOverlapError,
    NumericalError,
    PipelineError,
    ValidationError,
)
from .forecasting import (
    ForecastRecord,
    LaggedDesign,
    build_design,
    normalize_mae_table,
    persistence_forecast,
    rolling_evaluation,
)
from .gp import GaussianProcessForecaster, composite_kernel_arf, composite_kernel_sarf, se_kernel
from .impact import (
    AggregatedPanel,
    ImpactReport,
    aggregate_countries,
    correlate_features,
    impact_analysis,
)
from .news import (
    ArFit,
    GammaSeries,
    NewsRatio,
    PeakReport,
    adjust_signal,
    fit_ar,
    fit_ar_exog,
    gamma_at,
    gamma_series,
    peak_reduction_report,
)
from .symptoms import (
    SYMPTOM_OCCURRENCE_PROBABILITIES,
    BaselineBand,
    SymptomCategory,
    SymptomPanel,
    aggregate_category,
    build_panel_scores,
    build_symptom_panel,
    historical_baseline,
    preprocess_category,
    weighted_score,
)
from .synthetic import PlantedTruth, SyntheticScenario, generate_synthetic
from .timeseries import (
    LagCorrelation,
    NormalizationParams,
    TimeSeries,
    WeeklySeries,
    best_lag_correlation,
    harmonic_smooth,
    linear_detrend,
    mae,
    min_max_denormalize,
    min_max_normalize,
    moving_average,
    pearson,
    resample_weekly,
    z_score,
)
from .transfer import (
    QueryMapping,
    SourceEnsemble,
    TransferEstimate,
    align_temporal,
    infer,
    map_queries,
    per_model_shift_profile,
    scale_target,
    select_ensemble,
)

__version__ = "0.1.0"
