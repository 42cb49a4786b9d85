"""Run configuration: a flat key/value YAML file with strict validation.

Defaults follow the published analysis constants (14-day smoothing, 56-day
news window, 3..49 ensemble band, 6 lags, 7/14-day horizons). Unknown keys
are rejected rather than ignored.
"""

from __future__ import annotations

import dataclasses
import datetime as dt
import hashlib
import json
from dataclasses import dataclass

import yaml

from .errors import ValidationError


@dataclass(frozen=True)
class RunConfig:
    current_start: dt.date = dt.date(2019, 9, 30)
    current_end: dt.date | None = None
    smoothing_window: int = 14
    news_window: int = 56
    ensemble_min_active: int = 3
    ensemble_max_active: int = 49
    lambda_ratio: float = 0.5
    path_size: int = 1000
    gp_lags: int = 6
    horizons: tuple[int, ...] = (7, 14)
    seed: int = 0
    source_country: str = ""
    season_start: str = "09-30"
    alignment_window: int = 45
    impact_test_days: int = 21
    impact_max_density: float = 0.5
    impact_density_levels: int = 8
    impact_path_size: int = 100
    correlation_shift: int = 0
    forecast_target: str = "deaths"
    forecast_min_cumulative: int | None = None
    forecast_start: dt.date | None = None
    moving_average_window: int = 7
    gamma_normalization: str = "full"
    gp_restarts: int = 5
    gp_max_iter: int = 150
    include_disease_terms: bool = True
    uniform_weights: bool = False
    peak_half_window: int = 14
    synth_countries: tuple[str, ...] = ("AA", "BB")
    synth_history_years: int = 3
    synth_current_days: int = 300
    synth_peak_day: int = 160
    synth_beta: float = 0.3
    synth_noise: float = 0.02
    synth_case_lag: int = 14
    synth_death_lag: int = 21
    synth_queries_per_category: int = 2

    def __post_init__(self):
        positive_ints = [
            ("smoothing_window", self.smoothing_window),
            ("news_window", self.news_window),
            ("ensemble_min_active", self.ensemble_min_active),
            ("ensemble_max_active", self.ensemble_max_active),
            ("path_size", self.path_size),
            ("impact_test_days", self.impact_test_days),
            ("impact_density_levels", self.impact_density_levels),
            ("impact_path_size", self.impact_path_size),
            ("gp_restarts", self.gp_restarts),
            ("gp_max_iter", self.gp_max_iter),
            ("peak_half_window", self.peak_half_window),
            ("synth_history_years", self.synth_history_years),
            ("synth_current_days", self.synth_current_days),
            ("synth_queries_per_category", self.synth_queries_per_category),
        ]
        for name, value in positive_ints:
            if not isinstance(value, int) or value < 1:
                raise ValidationError(f"{name} must be a positive integer, got {value!r}")
        if self.gp_lags < 0 or self.alignment_window < 0:
            raise ValidationError("gp_lags and alignment_window must be >= 0")
        if self.ensemble_max_active < self.ensemble_min_active:
            raise ValidationError("ensemble_max_active must be >= ensemble_min_active")
        if self.lambda_ratio <= 0:
            raise ValidationError("lambda_ratio must be positive")
        if not 0.0 < self.impact_max_density <= 1.0:
            raise ValidationError("impact_max_density must lie in (0, 1]")
        if not self.horizons or any(h < 1 for h in self.horizons):
            raise ValidationError("horizons must be positive day counts")
        if self.gamma_normalization not in ("full", "window"):
            raise ValidationError("gamma_normalization must be 'full' or 'window'")
        if self.forecast_target not in ("deaths", "cases"):
            raise ValidationError("forecast_target must be 'deaths' or 'cases'")
        if self.moving_average_window % 2 == 0:
            raise ValidationError("moving_average_window must be odd")
        self.season_start_tuple()  # validates the format

    def season_start_tuple(self) -> tuple[int, int]:
        try:
            month, day = (int(x) for x in self.season_start.split("-"))
            dt.date(2021, month, day)
        except (ValueError, TypeError):
            raise ValidationError(
                f"season_start must look like 'MM-DD', got {self.season_start!r}"
            ) from None
        return month, day

    def resolved_min_cumulative(self) -> int:
        """Start-rule threshold, defaulted per clinical target kind."""
        if self.forecast_min_cumulative is not None:
            return self.forecast_min_cumulative
        return 10 if self.forecast_target == "deaths" else 250

    def as_dict(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if isinstance(value, dt.date):
                value = value.isoformat()
            elif isinstance(value, tuple):
                value = list(value)
            out[f.name] = value
        return out

    def config_hash(self) -> str:
        payload = json.dumps(self.as_dict(), sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()


_DATE_FIELDS = {"current_start", "current_end", "forecast_start"}
_TUPLE_INT_FIELDS = {"horizons"}
_TUPLE_STR_FIELDS = {"synth_countries"}


def _coerce(name: str, value):
    if name in _DATE_FIELDS:
        if value is None:
            return None
        if isinstance(value, dt.date):
            return value
        try:
            return dt.date.fromisoformat(str(value))
        except ValueError:
            raise ValidationError(f"{name} must be an ISO date, got {value!r}") from None
    if name in _TUPLE_INT_FIELDS:
        if isinstance(value, str):
            value = value.split(",")
        elif isinstance(value, int):
            value = [value]
        try:
            return tuple(int(v) for v in value)
        except (TypeError, ValueError):
            raise ValidationError(f"{name} must be a list of integers") from None
    if name in _TUPLE_STR_FIELDS:
        if isinstance(value, str):
            value = value.split(",")
        return tuple(str(v).strip() for v in value)
    return value


def load_config(path) -> RunConfig:
    """Parse and validate a flat YAML config file."""
    with open(path) as handle:
        raw = yaml.safe_load(handle)
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ValidationError(f"{path}: config must be a flat key/value mapping")
    return config_from_mapping(raw, source=str(path))


def config_from_mapping(raw: dict, source: str = "config") -> RunConfig:
    fields = {f.name: f for f in dataclasses.fields(RunConfig)}
    unknown = sorted(set(raw) - set(fields))
    if unknown:
        raise ValidationError(f"{source}: unknown config keys {unknown}")
    for key, value in raw.items():
        if isinstance(value, dict):
            raise ValidationError(f"{source}: nested values are not allowed ({key})")
        if isinstance(value, list) and key not in _TUPLE_INT_FIELDS | _TUPLE_STR_FIELDS:
            raise ValidationError(f"{source}: {key} does not take a list")
    kwargs = {k: _coerce(k, v) for k, v in raw.items()}
    return RunConfig(**kwargs)
