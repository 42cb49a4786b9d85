"""File ingestion, validation, and deterministic artifact writing.

CSV is the canonical interchange format. Loaders reject gaps, duplicates,
and malformed values with the offending line number; writers are atomic
(temp file plus rename) and byte-deterministic for fixed inputs.
"""

from __future__ import annotations

import csv
import datetime as dt
import hashlib
import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import IngestionError, ValidationError
from .news import NewsRatio
from .symptoms import SymptomCategory
from .timeseries import TimeSeries

QUERY_HEADER = ["date", "query", "frequency"]
CLINICAL_HEADER = ["date", "country", "cases", "deaths"]
NEWS_HEADER = ["date", "matched", "total"]


def _parse_date(text: str, line: int) -> dt.date:
    try:
        return dt.date.fromisoformat(text)
    except ValueError as exc:
        raise IngestionError(f"bad ISO date {text!r}: {exc}", line=line) from None


def _parse_nonneg_int(text: str, what: str, line: int) -> int:
    try:
        value = int(text)
    except ValueError:
        raise IngestionError(f"{what} must be an integer, got {text!r}", line=line) from None
    if value < 0:
        raise IngestionError(f"{what} must be non-negative, got {value}", line=line)
    return value


def _check_header(row: list[str], expected: list[str], path) -> None:
    if row != expected:
        raise IngestionError(
            f"{path}: expected header {','.join(expected)}, got {','.join(row)}", line=1
        )


def _series_from_rows(rows: dict[dt.date, float], what: str) -> TimeSeries:
    """Build a gap-free daily series; a missing date is an error, not imputed."""
    dates = sorted(rows)
    start, end = dates[0], dates[-1]
    expected = (end - start).days + 1
    if len(dates) != expected:
        present = set(dates)
        cursor = start
        while cursor in present:
            cursor += dt.timedelta(days=1)
        raise IngestionError(f"{what} has a gap: missing {cursor.isoformat()}")
    return TimeSeries(start, np.array([rows[d] for d in dates]))


def load_query_frequencies(path) -> dict[str, TimeSeries]:
    """Read a date,query,frequency file into one gap-free series per query."""
    per_query: dict[str, dict[dt.date, float]] = {}
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestionError(f"{path} is empty") from None
        _check_header(header, QUERY_HEADER, path)
        for row in reader:
            line = reader.line_num
            if len(row) != 3:
                raise IngestionError(f"expected 3 columns, got {len(row)}", line=line)
            date = _parse_date(row[0], line)
            query = row[1]
            if not query:
                raise IngestionError("query id must be non-empty", line=line)
            try:
                freq = float(row[2])
            except ValueError:
                raise IngestionError(f"bad frequency {row[2]!r}", line=line) from None
            if not np.isfinite(freq) or freq < 0.0:
                raise IngestionError(f"frequency must be >= 0, got {row[2]}", line=line)
            bucket = per_query.setdefault(query, {})
            if date in bucket:
                raise IngestionError(
                    f"duplicate entry for ({date.isoformat()}, {query})", line=line
                )
            bucket[date] = freq
    if not per_query:
        raise IngestionError(f"{path} contains no data rows")
    return {q: _series_from_rows(rows, f"query {q!r}") for q, rows in sorted(per_query.items())}


def load_clinical(path, country: str | None = None):
    """Read date,country,cases,deaths rows into per-country daily series.

    Returns ``{country: (cases, deaths)}``, or the single pair when a
    country code is given.
    """
    cases: dict[str, dict[dt.date, float]] = {}
    deaths: dict[str, dict[dt.date, float]] = {}
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestionError(f"{path} is empty") from None
        _check_header(header, CLINICAL_HEADER, path)
        for row in reader:
            line = reader.line_num
            if len(row) != 4:
                raise IngestionError(f"expected 4 columns, got {len(row)}", line=line)
            date = _parse_date(row[0], line)
            code = row[1]
            if not code:
                raise IngestionError("country code must be non-empty", line=line)
            n_cases = _parse_nonneg_int(row[2], "cases", line)
            n_deaths = _parse_nonneg_int(row[3], "deaths", line)
            if date in cases.setdefault(code, {}):
                raise IngestionError(
                    f"duplicate entry for ({date.isoformat()}, {code})", line=line
                )
            cases[code][date] = float(n_cases)
            deaths.setdefault(code, {})[date] = float(n_deaths)
    if not cases:
        raise IngestionError(f"{path} contains no data rows")
    result = {
        code: (
            _series_from_rows(cases[code], f"cases[{code}]"),
            _series_from_rows(deaths[code], f"deaths[{code}]"),
        )
        for code in sorted(cases)
    }
    if country is None:
        return result
    if country not in result:
        raise IngestionError(f"{path} holds no rows for country {country!r}")
    return result[country]


@dataclass(frozen=True)
class NewsCounts:
    """Daily article counts: pandemic-related vs total published."""

    start_date: dt.date
    matched: np.ndarray
    total: np.ndarray

    def __post_init__(self):
        matched = np.asarray(self.matched, dtype=np.int64)
        total = np.asarray(self.total, dtype=np.int64)
        if matched.shape != total.shape or matched.ndim != 1 or matched.size == 0:
            raise ValidationError("matched and total must be equal-length 1-D sequences")
        if np.any(total <= 0):
            raise ValidationError("total article counts must be positive")
        if np.any(matched < 0) or np.any(matched > total):
            raise ValidationError("matched counts must satisfy 0 <= matched <= total")
        matched.flags.writeable = False
        total.flags.writeable = False
        object.__setattr__(self, "matched", matched)
        object.__setattr__(self, "total", total)

    def ratio(self) -> NewsRatio:
        return NewsRatio(TimeSeries(self.start_date, self.matched / self.total))


def load_news_counts(path) -> NewsCounts:
    """Read date,matched,total rows into daily article counts."""
    rows: dict[dt.date, tuple[int, int]] = {}
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestionError(f"{path} is empty") from None
        _check_header(header, NEWS_HEADER, path)
        for row in reader:
            line = reader.line_num
            if len(row) != 3:
                raise IngestionError(f"expected 3 columns, got {len(row)}", line=line)
            date = _parse_date(row[0], line)
            matched = _parse_nonneg_int(row[1], "matched", line)
            total = _parse_nonneg_int(row[2], "total", line)
            if total <= 0:
                raise IngestionError("total must be positive", line=line)
            if matched > total:
                raise IngestionError(
                    f"matched {matched} exceeds total {total}", line=line
                )
            if date in rows:
                raise IngestionError(f"duplicate entry for {date.isoformat()}", line=line)
            rows[date] = (matched, total)
    if not rows:
        raise IngestionError(f"{path} contains no data rows")
    dates = sorted(rows)
    counts = _series_from_rows({d: float(rows[d][0]) for d in dates}, "news")
    return NewsCounts(
        start_date=counts.start_date,
        matched=np.array([rows[d][0] for d in dates]),
        total=np.array([rows[d][1] for d in dates]),
    )


def load_news_ratio(path) -> NewsRatio:
    """Daily pandemic-coverage ratio from an article-count file."""
    return load_news_counts(path).ratio()


def load_categories(path) -> tuple[SymptomCategory, ...]:
    """Read the category-definition JSON: name, weight, member queries."""
    with open(path) as handle:
        try:
            raw = json.load(handle)
        except json.JSONDecodeError as exc:
            raise IngestionError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(raw, list) or not raw:
        raise IngestionError(f"{path}: expected a non-empty JSON array")
    categories = []
    for entry in raw:
        try:
            categories.append(
                SymptomCategory(
                    name=entry["name"],
                    weight=float(entry["weight"]),
                    member_queries=tuple(entry["queries"]),
                    is_disease_terms=bool(entry.get("disease_terms", False)),
                )
            )
        except (KeyError, TypeError) as exc:
            raise IngestionError(f"{path}: malformed category entry ({exc})") from None
    return tuple(categories)


@dataclass(frozen=True)
class CountryDataset:
    """Everything one country contributes: queries, clinical, news, categories."""

    country: str
    queries: dict[str, TimeSeries]
    cases: TimeSeries
    deaths: TimeSeries
    news: NewsCounts
    categories: tuple[SymptomCategory, ...]
    planted: object | None = None

    def __post_init__(self):
        if not self.country:
            raise ValidationError("country code must be non-empty")
        for cat in self.categories:
            missing = [q for q in cat.member_queries if q not in self.queries]
            if missing:
                raise ValidationError(
                    f"category {cat.name!r} references unknown queries {missing}"
                )
        object.__setattr__(self, "categories", tuple(self.categories))


# -- deterministic writing ---------------------------------------------------


def atomic_write_bytes(path, payload: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, header: list[str], rows) -> None:
    import io as _io

    buffer = _io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    atomic_write_bytes(path, buffer.getvalue().encode())


def write_json(path, obj) -> None:
    text = json.dumps(obj, sort_keys=True, indent=2) + "\n"
    atomic_write_bytes(path, text.encode())


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def categories_payload(categories) -> list[dict]:
    payload = []
    for cat in categories:
        entry = {
            "name": cat.name,
            "weight": cat.weight,
            "queries": list(cat.member_queries),
        }
        if cat.is_disease_terms:
            entry["disease_terms"] = True
        payload.append(entry)
    return payload


def write_dataset(dataset: CountryDataset, root) -> list[Path]:
    """Write one country's input files under ``root/<code>/``."""
    root = Path(root)
    country_dir = root / dataset.country
    written = []

    query_rows = []
    for query in sorted(dataset.queries):
        series = dataset.queries[query]
        for i, value in enumerate(series.values):
            query_rows.append((series.date_at(i).isoformat(), query, repr(float(value))))
    query_rows.sort()
    path = country_dir / "queries.csv"
    write_csv(path, QUERY_HEADER, query_rows)
    written.append(path)

    news_rows = [
        (
            (dataset.news.start_date + dt.timedelta(days=i)).isoformat(),
            int(dataset.news.matched[i]),
            int(dataset.news.total[i]),
        )
        for i in range(dataset.news.matched.size)
    ]
    path = country_dir / "news.csv"
    write_csv(path, NEWS_HEADER, news_rows)
    written.append(path)

    path = country_dir / "categories.json"
    write_json(path, categories_payload(dataset.categories))
    written.append(path)
    return written


def write_clinical(datasets: list[CountryDataset], path) -> Path:
    """Write the shared clinical file covering every given country."""
    rows = []
    for dataset in sorted(datasets, key=lambda d: d.country):
        cases, deaths = dataset.cases, dataset.deaths
        if cases.start_date != deaths.start_date or len(cases) != len(deaths):
            raise ValidationError(f"{dataset.country}: cases/deaths spans differ")
        for i in range(len(cases)):
            rows.append(
                (
                    cases.date_at(i).isoformat(),
                    dataset.country,
                    int(cases.values[i]),
                    int(deaths.values[i]),
                )
            )
    write_csv(path, CLINICAL_HEADER, rows)
    return Path(path)


def load_dataset(root, country: str) -> CountryDataset:
    """Load one country's inputs written in the standard layout."""
    root = Path(root)
    country_dir = root / country
    if not country_dir.is_dir():
        raise IngestionError(f"no input directory for country {country!r} under {root}")
    queries = load_query_frequencies(country_dir / "queries.csv")
    news = load_news_counts(country_dir / "news.csv")
    categories = load_categories(country_dir / "categories.json")
    cases, deaths = load_clinical(root / "clinical.csv", country)
    return CountryDataset(
        country=country,
        queries=queries,
        cases=cases,
        deaths=deaths,
        news=news,
        categories=categories,
    )


def available_countries(root) -> list[str]:
    """Country codes present in an input directory."""
    root = Path(root)
    return sorted(
        p.name for p in root.iterdir() if p.is_dir() and (p / "queries.csv").is_file()
    )
