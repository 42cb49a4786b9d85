"""Command-line pipelines: score, adjust, transfer, impact, forecast, synth, report.

Every subcommand reads flat-file inputs, executes one module pipeline, and
writes CSV/JSON artifacts plus a manifest (config hash, input hashes,
seed, output hashes). Outputs are a pure function of inputs, config, and
seed; rerunning a command reproduces byte-identical files.
"""

from __future__ import annotations

import csv
import datetime as dt
import functools
import sys
from pathlib import Path

import click
import numpy as np

from . import io as eio
from .config import RunConfig, config_from_mapping, load_config
from .errors import PipelineError, ValidationError
from .forecasting import normalize_mae_table, rolling_evaluation
from .impact import aggregate_countries, correlate_features, impact_analysis
from .news import adjust_signal, gamma_series, peak_reduction_report
from .symptoms import build_panel_scores, build_symptom_panel
from .synthetic import SyntheticScenario, generate_countries
from .timeseries import (
    TimeSeries,
    align_pair,
    min_max_normalize,
    normalize_array,
    smooth_columns,
)
from .transfer import (
    align_temporal,
    infer,
    map_queries,
    per_model_shift_profile,
    scale_target,
    select_ensemble,
)
from .elasticnet import fit_path


def _fmt(value: float) -> str:
    return repr(float(value))


def common_options(f):
    @click.option("--config", "config_path", type=click.Path(exists=True), default=None,
                  help="Flat YAML config; defaults used when omitted.")
    @click.option("--input-dir", type=click.Path(exists=True, file_okay=False),
                  required=True, help="Directory holding the input files.")
    @click.option("--out-dir", type=click.Path(file_okay=False), required=True,
                  help="Directory receiving artifacts and the manifest.")
    @click.option("--seed", type=int, default=None, help="Overrides the config seed.")
    @click.option("--plots", is_flag=True, help="Also write SVG line plots.")
    @functools.wraps(f)
    def wrapper(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except PipelineError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(exc.exit_code)

    return wrapper


def _load_run_config(config_path, seed) -> RunConfig:
    config = load_config(config_path) if config_path else RunConfig()
    if seed is not None:
        config = config_from_mapping({**config.as_dict(), "seed": seed})
    return config


def _manifest(out_dir: Path, command: str, config: RunConfig, inputs, outputs) -> None:
    manifest = {
        "command": command,
        "config": config.as_dict(),
        "config_hash": config.config_hash(),
        "seed": config.seed,
        "inputs": {str(p): eio.sha256_file(p) for p in sorted(set(map(str, inputs)))},
        "outputs": {
            str(Path(p).relative_to(out_dir)): eio.sha256_file(p)
            for p in sorted(set(map(str, outputs)))
        },
    }
    eio.write_json(out_dir / "manifest.json", manifest)


def _dataset_paths(input_dir: Path, country: str) -> list[Path]:
    base = input_dir / country
    return [
        base / "queries.csv",
        base / "news.csv",
        base / "categories.json",
        input_dir / "clinical.csv",
    ]


def _truncate(series: TimeSeries, end: dt.date | None) -> TimeSeries:
    if end is None or end >= series.end_date:
        return series
    n = (end - series.start_date).days + 1
    return series.slice(0, n)


def _query_categories(dataset) -> dict[str, str]:
    return {
        query: cat.name for cat in dataset.categories for query in cat.member_queries
    }


def _smoothed_query_matrix(dataset, config: RunConfig):
    """Categorized query columns over the current window, smoothed.

    Uses the pre-window history as smoothing warm-up when present so the
    output spans the full current window.
    """
    window = config.smoothing_window
    categories = _query_categories(dataset)
    ids = sorted(categories)
    start = config.current_start
    columns = []
    out_start = None
    for query in ids:
        series = _truncate(dataset.queries[query], config.current_end)
        warm_start = start - dt.timedelta(days=window - 1)
        if series.start_date <= warm_start:
            raw = series.window(warm_start, (series.end_date - warm_start).days + 1)
        else:
            raw = series.window(start, (series.end_date - start).days + 1)
        smoothed = smooth_columns(raw.values[:, None], window)[:, 0]
        col_start = raw.start_date + dt.timedelta(days=window - 1)
        if out_start is None:
            out_start = col_start
        elif col_start != out_start:
            raise ValidationError("query series must share one span")
        columns.append(smoothed)
    lengths = {len(c) for c in columns}
    if len(lengths) != 1:
        raise ValidationError("query series must share one span")
    matrix = np.column_stack(columns)
    category_labels = [categories[q] for q in ids]
    return matrix, ids, category_labels, out_start


def _aligned_clinical(series: TimeSeries, start: dt.date, n_days: int) -> TimeSeries:
    return series.window(start, n_days)


# -- commands -----------------------------------------------------------------


@click.group()
def main():
    """Disease-activity tracking from online-search frequency time series."""


@main.command()
@click.option("--country", required=True, help="Country code to score.")
@common_options
def score(country, config_path, input_dir, out_dir, seed, plots):
    """Symptom-weighted unsupervised score plus the seasonal baseline band."""
    config = _load_run_config(config_path, seed)
    input_dir, out_dir = Path(input_dir), Path(out_dir)
    dataset = eio.load_dataset(input_dir, country)
    panel = build_symptom_panel(
        {q: _truncate(s, config.current_end) for q, s in dataset.queries.items()},
        list(dataset.categories),
        config.current_start,
        config.smoothing_window,
    )
    score_series, band = build_panel_scores(
        panel,
        include_disease_terms=config.include_disease_terms,
        uniform_weights=config.uniform_weights,
        season_start=config.season_start_tuple(),
    )
    outputs = []
    score_path = out_dir / "score.csv"
    eio.write_csv(
        score_path,
        ["date", "score"],
        [
            (score_series.date_at(i).isoformat(), _fmt(v))
            for i, v in enumerate(score_series.values)
        ],
    )
    outputs.append(score_path)
    baseline_path = out_dir / "baseline.csv"
    eio.write_csv(
        baseline_path,
        ["season_day", "mean", "lower", "upper"],
        [
            (i, _fmt(band.mean_trend.values[i]), _fmt(band.lower.values[i]), _fmt(band.upper.values[i]))
            for i in range(len(band.mean_trend))
        ],
    )
    outputs.append(baseline_path)
    meta_path = out_dir / "score_meta.json"
    eio.write_json(
        meta_path,
        {
            "country": country,
            "baseline_years": band.n_years,
            "constant_categories": list(panel.constant_categories),
            "include_disease_terms": config.include_disease_terms,
            "uniform_weights": config.uniform_weights,
        },
    )
    outputs.append(meta_path)
    if plots:
        from .plots import line_plot

        plot_path = out_dir / "score.svg"
        line_plot(
            plot_path,
            {"score": (score_series.dates(), list(score_series.values))},
            f"Search-symptom score ({country})",
            "weighted score",
        )
        outputs.append(plot_path)
    _manifest(out_dir, "score", config, _dataset_paths(input_dir, country), outputs)
    click.echo(f"score: wrote {len(outputs)} artifacts to {out_dir}")


@main.command()
@click.option("--country", required=True, help="Country code to adjust.")
@common_options
def adjust(country, config_path, input_dir, out_dir, seed, plots):
    """News-deconfounded score: infection fraction and adjusted signal."""
    config = _load_run_config(config_path, seed)
    input_dir, out_dir = Path(input_dir), Path(out_dir)
    dataset = eio.load_dataset(input_dir, country)
    panel = build_symptom_panel(
        {q: _truncate(s, config.current_end) for q, s in dataset.queries.items()},
        list(dataset.categories),
        config.current_start,
        config.smoothing_window,
    )
    score_series, _ = build_panel_scores(
        panel,
        include_disease_terms=config.include_disease_terms,
        uniform_weights=config.uniform_weights,
        season_start=config.season_start_tuple(),
    )
    news_series = _truncate(dataset.news.ratio().series, config.current_end)
    g, m = align_pair(score_series, news_series)
    g_norm, _ = min_max_normalize(g)
    gamma = gamma_series(
        g_norm, m, window=config.news_window, normalization=config.gamma_normalization
    )
    g_slice = g_norm.window(gamma.series.start_date, len(gamma.series))
    adjusted = adjust_signal(g_slice, gamma)
    report = peak_reduction_report(g_slice, adjusted, config.peak_half_window)

    outputs = []
    adjusted_path = out_dir / "adjusted.csv"
    eio.write_csv(
        adjusted_path,
        ["date", "raw", "gamma", "adjusted"],
        [
            (
                adjusted.date_at(i).isoformat(),
                _fmt(g_slice.values[i]),
                _fmt(gamma.series.values[i]),
                _fmt(adjusted.values[i]),
            )
            for i in range(len(adjusted))
        ],
    )
    outputs.append(adjusted_path)
    report_path = out_dir / "peak_report.json"
    eio.write_json(
        report_path,
        {
            "country": country,
            "peak_date": adjusted.date_at(report.peak_index).isoformat(),
            "in_window_reduction_pct": report.in_window_reduction_pct,
            "out_window_reduction_pct": report.out_window_reduction_pct,
            "in_window_r": report.in_window_r,
            "half_window_days": config.peak_half_window,
            "window_truncated": report.window_truncated,
        },
    )
    outputs.append(report_path)
    if plots:
        from .plots import line_plot

        plot_path = out_dir / "adjusted.svg"
        line_plot(
            plot_path,
            {
                "raw score": (g_slice.dates(), list(g_slice.values)),
                "adjusted": (adjusted.dates(), list(adjusted.values)),
            },
            f"News-adjusted score ({country})",
            "normalized score",
        )
        outputs.append(plot_path)
    _manifest(out_dir, "adjust", config, _dataset_paths(input_dir, country), outputs)
    click.echo(f"adjust: wrote {len(outputs)} artifacts to {out_dir}")


@main.command()
@click.option("--country", required=True, help="Target country code.")
@common_options
def transfer(country, config_path, input_dir, out_dir, seed, plots):
    """Transfer the source-country case model onto the target country."""
    config = _load_run_config(config_path, seed)
    if not config.source_country:
        raise ValidationError("transfer needs source_country in the config")
    if config.source_country == country:
        click.echo("note: source equals target (self-transfer)", err=True)
    input_dir, out_dir = Path(input_dir), Path(out_dir)
    source = eio.load_dataset(input_dir, config.source_country)
    target = eio.load_dataset(input_dir, country)

    S, source_ids, source_cats, s_start = _smoothed_query_matrix(source, config)
    T, target_ids, target_cats, t_start = _smoothed_query_matrix(target, config)
    n_days = min(S.shape[0], T.shape[0])
    S, T = S[:n_days], T[:n_days]

    y_raw = _aligned_clinical(_truncate(source.cases, config.current_end), s_start, n_days)
    S_norm = np.column_stack([normalize_array(S[:, j])[0] for j in range(S.shape[1])])
    y_norm, y_params = normalize_array(y_raw.values)

    path = fit_path(S_norm, y_norm, q=config.path_size, lambda_ratio=config.lambda_ratio)
    ensemble = select_ensemble(
        path, config.ensemble_min_active, config.ensemble_max_active, y_params
    )
    active_union = sorted({j for m in ensemble.models for j in np.flatnonzero(m.coef_)})
    shift = align_temporal(S[:, active_union], T, config.alignment_window)
    mapping = map_queries(S, T, source_cats, target_cats, shift, source_ids, target_ids)
    Z = np.column_stack(
        [normalize_array(T[:, j])[0] for j in mapping.target_columns]
    )
    Z_scaled, ratios, ratio_flags = scale_target(Z, S_norm)
    estimate = infer(ensemble, Z_scaled, t_start)
    profile = per_model_shift_profile(ensemble, S, T, config.alignment_window)

    outputs = []
    transfer_path = out_dir / "transfer.csv"
    eio.write_csv(
        transfer_path,
        ["date", "mean", "lower", "upper"],
        [
            (
                estimate.mean.date_at(i).isoformat(),
                _fmt(estimate.mean.values[i]),
                _fmt(estimate.lower.values[i]),
                _fmt(estimate.upper.values[i]),
            )
            for i in range(len(estimate.mean))
        ],
    )
    outputs.append(transfer_path)
    meta_path = out_dir / "transfer_meta.json"
    eio.write_json(
        meta_path,
        {
            "source_country": config.source_country,
            "target_country": country,
            "global_shift_days": mapping.global_shift,
            "ensemble_size": estimate.ensemble_size,
            "path_size": len(path),
            "query_mapping": [
                {
                    "source": p.source,
                    "target": p.target,
                    "category": p.category,
                    "r": p.r,
                    "fallback": p.fallback,
                }
                for p in mapping.pairs
            ],
            "zero_mean_ratio_columns": list(ratio_flags),
            "shift_profile": {
                "mean": profile.mean,
                "ci_lower": profile.ci_lower,
                "ci_upper": profile.ci_upper,
            },
        },
    )
    outputs.append(meta_path)
    if plots:
        from .plots import line_plot

        plot_path = out_dir / "transfer.svg"
        dates = estimate.mean.dates()
        line_plot(
            plot_path,
            {
                "estimate": (dates, list(estimate.mean.values)),
                "band": (dates, list(estimate.lower.values), list(estimate.upper.values)),
            },
            f"Transferred case-model estimate ({config.source_country} -> {country})",
            "estimated cases (source scale)",
        )
        outputs.append(plot_path)
    inputs = _dataset_paths(input_dir, country) + _dataset_paths(
        input_dir, config.source_country
    )
    _manifest(out_dir, "transfer", config, inputs, outputs)
    click.echo(f"transfer: wrote {len(outputs)} artifacts to {out_dir}")


@main.command()
@click.option("--country", default=None, help="Restrict to one country (default: all).")
@common_options
def impact(country, config_path, input_dir, out_dir, seed, plots):
    """Query-outcome correlation ranking and regression impact analysis."""
    config = _load_run_config(config_path, seed)
    input_dir, out_dir = Path(input_dir), Path(out_dir)
    countries = [country] if country else eio.available_countries(input_dir)
    if not countries:
        raise ValidationError(f"no country inputs found under {input_dir}")
    matrices: dict[str, np.ndarray] = {}
    targets_by_kind = {"cases": {}, "deaths": {}}
    query_ids = None
    inputs = []
    for code in countries:
        dataset = eio.load_dataset(input_dir, code)
        inputs.extend(_dataset_paths(input_dir, code))
        matrix, ids, _, start = _smoothed_query_matrix(dataset, config)
        if query_ids is None:
            query_ids = ids
        elif ids != query_ids:
            raise ValidationError("countries must share one query vocabulary")
        matrices[code] = matrix
        for kind in targets_by_kind:
            series = _truncate(getattr(dataset, kind), config.current_end)
            targets_by_kind[kind][code] = _aligned_clinical(
                series, start, matrix.shape[0]
            ).values

    outputs = []
    for kind in ("cases", "deaths"):
        panel = aggregate_countries(matrices, targets_by_kind[kind], query_ids)
        ranking = correlate_features(panel, shift=config.correlation_shift)
        corr_path = out_dir / f"correlations_{kind}.csv"
        eio.write_csv(
            corr_path,
            ["query", "r", "rank", "degenerate"],
            [
                (f.query, _fmt(f.r) if not f.degenerate else "", f.rank, int(f.degenerate))
                for f in ranking
            ],
        )
        outputs.append(corr_path)
        report = impact_analysis(
            panel,
            test_days=config.impact_test_days,
            max_density=config.impact_max_density,
            density_levels=config.impact_density_levels,
            path_size=config.impact_path_size,
            lambda_ratio=config.lambda_ratio,
        )
        impact_path = out_dir / f"impact_{kind}.csv"
        eio.write_csv(
            impact_path,
            ["query", "theta", "rank"],
            [
                (query, _fmt(report.theta[query]), rank)
                for rank, query in enumerate(report.ranking, start=1)
            ],
        )
        outputs.append(impact_path)
        meta_path = out_dir / f"impact_{kind}_meta.json"
        eio.write_json(
            meta_path,
            {
                "countries": list(panel.countries),
                "test_days": config.impact_test_days,
                "density_levels": config.impact_density_levels,
                "max_density": config.impact_max_density,
                "skipped_days": list(report.skipped_days),
                "denominator": report.denominator,
                "denominator_nonpositive": report.denominator_nonpositive,
                "correlation_shift": config.correlation_shift,
            },
        )
        outputs.append(meta_path)
    _manifest(out_dir, "impact", config, inputs, outputs)
    click.echo(f"impact: wrote {len(outputs)} artifacts to {out_dir}")


@main.command()
@click.option("--country", default=None, help="Restrict to one country (default: all).")
@click.option("--horizon", "horizons", type=int, multiple=True,
              help="Forecast horizons in days (repeatable); default from config.")
@common_options
def forecast(country, horizons, config_path, input_dir, out_dir, seed, plots):
    """Rolling-origin forecast evaluation of the three model kinds."""
    config = _load_run_config(config_path, seed)
    input_dir, out_dir = Path(input_dir), Path(out_dir)
    countries = [country] if country else eio.available_countries(input_dir)
    if not countries:
        raise ValidationError(f"no country inputs found under {input_dir}")
    horizons = tuple(horizons) or config.horizons
    inputs = []
    rows = []
    table = {h: {} for h in horizons}
    for code in countries:
        dataset = eio.load_dataset(input_dir, code)
        inputs.extend(_dataset_paths(input_dir, code))
        matrix, ids, _, start = _smoothed_query_matrix(dataset, config)
        normalized = np.column_stack(
            [normalize_array(matrix[:, j])[0] for j in range(matrix.shape[1])]
        )
        z = TimeSeries(start, normalized.mean(axis=1))
        outcome = _truncate(getattr(dataset, config.forecast_target), config.current_end)
        y = _aligned_clinical(outcome, start, len(z))
        for horizon in horizons:
            records = rolling_evaluation(
                z,
                y,
                lags=config.gp_lags,
                horizon=horizon,
                min_cumulative=config.resolved_min_cumulative(),
                start_date=config.forecast_start,
                seed=config.seed,
                gp_restarts=config.gp_restarts,
                gp_max_iter=config.gp_max_iter,
            )
            for kind, record in records.items():
                table[horizon].setdefault(code, {})[kind] = record
                for i, date in enumerate(record.target_dates):
                    std = record.stddevs[i]
                    rows.append(
                        (
                            code,
                            date.isoformat(),
                            kind,
                            horizon,
                            _fmt(record.forecasts[i]),
                            "" if np.isnan(std) else _fmt(std),
                            _fmt(record.truths[i]),
                        )
                    )
    rows.sort()
    outputs = []
    forecasts_path = out_dir / "forecasts.csv"
    eio.write_csv(
        forecasts_path,
        ["country", "date", "model", "horizon", "forecast", "stddev", "truth"],
        rows,
    )
    outputs.append(forecasts_path)

    kinds = ("ar", "sar", "per")
    header = ["country"]
    for horizon in horizons:
        for kind in kinds:
            header += [f"{kind}{horizon}_mae", f"{kind}{horizon}_std"]
    summary_rows = []
    for code in countries:
        row = [code]
        for horizon in horizons:
            for kind in kinds:
                record = table[horizon][code][kind]
                row += [_fmt(record.mae_mean), _fmt(record.mae_std)]
        summary_rows.append(tuple(row))
    norm_cells = {
        code: {
            (kind, horizon): table[horizon][code][kind].mae_mean
            for horizon in horizons
            for kind in kinds
        }
        for code in countries
    }
    normalized_row = normalize_mae_table(norm_cells)
    norm = ["norm_mean"]
    for horizon in horizons:
        for kind in kinds:
            norm += [_fmt(normalized_row[(kind, horizon)]), ""]
    summary_rows.append(tuple(norm))
    summary_path = out_dir / "forecast_summary.csv"
    eio.write_csv(summary_path, header, summary_rows)
    outputs.append(summary_path)

    if plots:
        from .plots import line_plot

        for code in countries:
            for horizon in horizons:
                records = table[horizon][code]
                series = {
                    "truth": (
                        [d for d in records["ar"].target_dates],
                        list(records["ar"].truths),
                    )
                }
                for kind in kinds:
                    record = records[kind]
                    series[kind] = (
                        [d for d in record.target_dates],
                        list(record.forecasts),
                    )
                plot_path = out_dir / f"forecast_{code}_{horizon}d.svg"
                line_plot(
                    plot_path,
                    series,
                    f"{horizon}-day-ahead {config.forecast_target} ({code})",
                    config.forecast_target,
                )
                outputs.append(plot_path)
    _manifest(out_dir, "forecast", config, inputs, outputs)
    click.echo(f"forecast: wrote {len(outputs)} artifacts to {out_dir}")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--out-dir", type=click.Path(file_okay=False), required=True)
@click.option("--seed", type=int, default=None, help="Overrides the config seed.")
def synth(config_path, out_dir, seed):
    """Generate planted-truth synthetic inputs for the other subcommands."""
    try:
        config = _load_run_config(config_path, seed)
        out_dir = Path(out_dir)
        base = SyntheticScenario(
            seed=config.seed,
            current_start=config.current_start,
            current_days=config.synth_current_days,
            history_years=config.synth_history_years,
            peak_day=config.synth_peak_day,
            beta=config.synth_beta,
            noise_scale=config.synth_noise,
            case_lag=config.synth_case_lag,
            death_lag=config.synth_death_lag,
            queries_per_category=config.synth_queries_per_category,
        )
        datasets = generate_countries(base, list(config.synth_countries))
        outputs = []
        for dataset in datasets:
            outputs.extend(eio.write_dataset(dataset, out_dir))
            truth_path = out_dir / "planted" / f"{dataset.country}_infection.csv"
            infection = dataset.planted.infection
            eio.write_csv(
                truth_path,
                ["date", "intensity"],
                [
                    (infection.date_at(i).isoformat(), _fmt(v))
                    for i, v in enumerate(infection.values)
                ],
            )
            outputs.append(truth_path)
        outputs.append(eio.write_clinical(datasets, out_dir / "clinical.csv"))
        planted_path = out_dir / "planted" / "planted.json"
        eio.write_json(
            planted_path,
            {
                ds.country: {
                    "seed": base.seed + 1000 * i,
                    "beta": ds.planted.beta,
                    "case_lag": ds.planted.case_lag,
                    "death_lag": ds.planted.death_lag,
                    "symptom_delays": ds.planted.symptom_delays,
                }
                for i, ds in enumerate(datasets)
            },
        )
        outputs.append(planted_path)
        _manifest(out_dir, "synth", config, [], outputs)
        click.echo(f"synth: wrote {len(outputs)} artifacts to {out_dir}")
    except PipelineError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(exc.exit_code)


@main.command()
@common_options
def report(config_path, input_dir, out_dir, seed, plots):
    """Summarize artifacts previously written by other subcommands."""
    config = _load_run_config(config_path, seed)
    input_dir, out_dir = Path(input_dir), Path(out_dir)
    known = [
        "score.csv",
        "baseline.csv",
        "adjusted.csv",
        "transfer.csv",
        "correlations_cases.csv",
        "correlations_deaths.csv",
        "impact_cases.csv",
        "impact_deaths.csv",
        "forecasts.csv",
        "forecast_summary.csv",
    ]
    summary = {}
    inputs = []
    for name in known:
        path = input_dir / name
        if not path.is_file():
            continue
        inputs.append(path)
        with open(path, newline="") as handle:
            reader = csv.reader(handle)
            header = next(reader)
            rows = list(reader)
        entry = {"rows": len(rows), "columns": header}
        numeric_stats = {}
        for j, column in enumerate(header):
            values = []
            for row in rows:
                try:
                    values.append(float(row[j]))
                except (ValueError, IndexError):
                    values = []
                    break
            if values:
                arr = np.asarray(values)
                numeric_stats[column] = {
                    "min": float(arr.min()),
                    "max": float(arr.max()),
                    "mean": float(arr.mean()),
                }
        if numeric_stats:
            entry["stats"] = numeric_stats
        summary[name] = entry
    if not summary:
        raise ValidationError(f"no known artifacts found under {input_dir}")
    report_path = out_dir / "report.json"
    eio.write_json(report_path, summary)
    _manifest(out_dir, "report", config, inputs, [report_path])
    click.echo(f"report: summarized {len(summary)} artifacts into {out_dir}")


if __name__ == "__main__":
    main()
