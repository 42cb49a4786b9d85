import datetime as dt

import numpy as np
import pytest

from episearch.errors import IngestionError
from episearch.io import (
    load_categories,
    load_clinical,
    load_dataset,
    load_news_ratio,
    load_query_frequencies,
    sha256_file,
    write_clinical,
    write_csv,
    write_dataset,
    write_json,
)
from episearch.synthetic import SyntheticScenario, generate_synthetic


def write_lines(path, lines):
    path.write_text("\n".join(lines) + "\n")


class TestQueryLoader:
    def test_two_rows(self, tmp_path):
        path = tmp_path / "queries.csv"
        write_lines(path, [
            "date,query,frequency",
            "2020-01-01,fever,0.5",
            "2020-01-02,fever,0.75",
        ])
        series = load_query_frequencies(path)
        assert list(series) == ["fever"]
        assert len(series["fever"]) == 2
        assert series["fever"].start_date == dt.date(2020, 1, 1)

    def test_gap_names_missing_date(self, tmp_path):
        path = tmp_path / "queries.csv"
        write_lines(path, [
            "date,query,frequency",
            "2020-01-01,fever,0.5",
            "2020-01-03,fever,0.75",
        ])
        with pytest.raises(IngestionError, match="2020-01-02"):
            load_query_frequencies(path)

    def test_duplicate_row_cites_line(self, tmp_path):
        path = tmp_path / "queries.csv"
        write_lines(path, [
            "date,query,frequency",
            "2020-01-01,fever,0.5",
            "2020-01-01,fever,0.6",
        ])
        with pytest.raises(IngestionError, match="line 3"):
            load_query_frequencies(path)

    def test_negative_frequency(self, tmp_path):
        path = tmp_path / "queries.csv"
        write_lines(path, [
            "date,query,frequency",
            "2020-01-01,fever,-0.5",
        ])
        with pytest.raises(IngestionError, match=">= 0"):
            load_query_frequencies(path)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "queries.csv"
        write_lines(path, ["day,term,value", "2020-01-01,fever,0.5"])
        with pytest.raises(IngestionError, match="header"):
            load_query_frequencies(path)


class TestClinicalLoader:
    def test_single_country(self, tmp_path):
        path = tmp_path / "clinical.csv"
        write_lines(path, [
            "date,country,cases,deaths",
            "2020-03-01,GB,10,1",
            "2020-03-02,GB,20,2",
            "2020-03-03,GB,15,3",
        ])
        cases, deaths = load_clinical(path, "GB")
        assert len(cases) == len(deaths) == 3
        assert deaths.values[2] == 3.0

    def test_mixed_countries_filtered(self, tmp_path):
        path = tmp_path / "clinical.csv"
        write_lines(path, [
            "date,country,cases,deaths",
            "2020-03-01,GB,10,1",
            "2020-03-01,IT,50,5",
        ])
        cases, _ = load_clinical(path, "IT")
        assert cases.values[0] == 50.0
        both = load_clinical(path)
        assert sorted(both) == ["GB", "IT"]

    def test_non_integer_cases(self, tmp_path):
        path = tmp_path / "clinical.csv"
        write_lines(path, [
            "date,country,cases,deaths",
            "2020-03-01,GB,10.5,1",
        ])
        with pytest.raises(IngestionError, match="integer"):
            load_clinical(path, "GB")

    def test_unknown_country(self, tmp_path):
        path = tmp_path / "clinical.csv"
        write_lines(path, ["date,country,cases,deaths", "2020-03-01,GB,1,0"])
        with pytest.raises(IngestionError, match="FR"):
            load_clinical(path, "FR")


class TestNewsLoader:
    def test_full_and_zero_coverage(self, tmp_path):
        path = tmp_path / "news.csv"
        write_lines(path, [
            "date,matched,total",
            "2020-03-01,100,100",
            "2020-03-02,0,100",
        ])
        ratio = load_news_ratio(path)
        assert ratio.series.values[0] == 1.0
        assert ratio.series.values[1] == 0.0

    def test_published_aggregate_ratio(self, tmp_path):
        path = tmp_path / "news.csv"
        write_lines(path, [
            "date,matched,total",
            "2020-03-01,2535735,10093349",
        ])
        ratio = load_news_ratio(path)
        assert ratio.series.values[0] == pytest.approx(0.2512, abs=5e-5)

    def test_matched_above_total(self, tmp_path):
        path = tmp_path / "news.csv"
        write_lines(path, ["date,matched,total", "2020-03-01,101,100"])
        with pytest.raises(IngestionError, match="exceeds"):
            load_news_ratio(path)

    def test_zero_total(self, tmp_path):
        path = tmp_path / "news.csv"
        write_lines(path, ["date,matched,total", "2020-03-01,0,0"])
        with pytest.raises(IngestionError, match="positive"):
            load_news_ratio(path)


class TestCategoriesLoader:
    def test_round_trip_entries(self, tmp_path):
        path = tmp_path / "categories.json"
        path.write_text(
            '[{"name": "fever", "weight": 0.601, "queries": ["fever", "high temperature"]},'
            ' {"name": "disease terms", "weight": 1.0, "queries": ["covid"],'
            ' "disease_terms": true}]'
        )
        cats = load_categories(path)
        assert cats[0].name == "fever"
        assert cats[0].member_queries == ("fever", "high temperature")
        assert cats[1].is_disease_terms

    def test_malformed_entry(self, tmp_path):
        path = tmp_path / "categories.json"
        path.write_text('[{"name": "fever"}]')
        with pytest.raises(IngestionError, match="malformed"):
            load_categories(path)


class TestWriters:
    def test_csv_deterministic(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        rows = [("2020-01-01", "x", repr(0.1)), ("2020-01-02", "x", repr(0.25))]
        write_csv(a, ["date", "query", "frequency"], rows)
        write_csv(b, ["date", "query", "frequency"], rows)
        assert a.read_bytes() == b.read_bytes()
        assert sha256_file(a) == sha256_file(b)

    def test_json_sorted_keys(self, tmp_path):
        path = tmp_path / "x.json"
        write_json(path, {"b": 1, "a": 2})
        assert path.read_text().index('"a"') < path.read_text().index('"b"')


class TestDatasetRoundTrip:
    def test_write_then_load_preserves_values(self, tmp_path):
        ds = generate_synthetic(SyntheticScenario(seed=21, current_days=90, peak_day=45))
        write_dataset(ds, tmp_path)
        write_clinical([ds], tmp_path / "clinical.csv")
        loaded = load_dataset(tmp_path, ds.country)
        assert sorted(loaded.queries) == sorted(ds.queries)
        for query in ds.queries:
            assert loaded.queries[query] == ds.queries[query]
        assert loaded.cases == ds.cases
        assert loaded.deaths == ds.deaths
        assert np.array_equal(loaded.news.matched, ds.news.matched)
        assert np.array_equal(loaded.news.total, ds.news.total)
        assert loaded.categories == ds.categories

    def test_rewrite_is_byte_identical(self, tmp_path):
        ds = generate_synthetic(SyntheticScenario(seed=22, current_days=90, peak_day=45))
        dir_a, dir_b = tmp_path / "a", tmp_path / "b"
        write_dataset(ds, dir_a)
        write_dataset(ds, dir_b)
        for name in ("queries.csv", "news.csv", "categories.json"):
            assert (dir_a / ds.country / name).read_bytes() == (
                dir_b / ds.country / name
            ).read_bytes()
