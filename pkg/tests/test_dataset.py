import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from insightminer.dataset import (
    FilterExpr,
    IngestionConfig,
    extract_samples,
    load_table,
    parse_filter,
    part_of_day,
)
from insightminer.errors import ConfigError, DatasetError, FilterSyntaxError


def make_config(**overrides):
    base = {
        "columns": {
            "ts": "timestamp",
            "physician": "categorical",
            "duration": "numeric",
        },
        "timestamp_column": "ts",
        "time_unit": "hours",
    }
    base.update(overrides)
    return IngestionConfig(**base)


def write_csv(tmp_path, text):
    path = tmp_path / "data.csv"
    path.write_text(text)
    return path


class TestLoadTable:
    def test_basic_load_with_derived_columns(self, tmp_path):
        path = write_csv(
            tmp_path,
            "ts,physician,duration\n"
            "2024-01-01T09:30:00,dr-a,1.5\n"
            "2024-01-02T14:00:00,dr-b,2.0\n"
            "2024-01-06T20:15:00,dr-a,0.5\n",
        )
        table = load_table(path, make_config())
        assert table.n_rows == 3
        assert table.columns["ts_weekday"] == ["Mon", "Tue", "Sat"]
        assert table.columns["ts_hour"] == [9.0, 14.0, 20.0]
        assert table.columns["ts_part_of_day"] == ["morning", "afternoon", "evening"]

    def test_header_only(self, tmp_path):
        path = write_csv(tmp_path, "ts,physician,duration\n")
        table = load_table(path, make_config())
        assert table.n_rows == 0

    def test_bad_numeric_cell_names_row_and_column(self, tmp_path):
        path = write_csv(
            tmp_path,
            "ts,physician,duration\n"
            "2024-01-01T09:30:00,dr-a,1.5\n"
            "2024-01-02T14:00:00,dr-b,oops\n",
        )
        with pytest.raises(DatasetError, match=r"row 2.*'duration'"):
            load_table(path, make_config())

    def test_missing_file(self, tmp_path):
        with pytest.raises(DatasetError, match="not found"):
            load_table(tmp_path / "nope.csv", make_config())

    def test_duplicate_column(self, tmp_path):
        path = write_csv(tmp_path, "ts,ts,duration\n")
        with pytest.raises(DatasetError, match="duplicate"):
            load_table(path, make_config())

    def test_missing_values_become_none(self, tmp_path):
        path = write_csv(
            tmp_path,
            "ts,physician,duration\n2024-01-01T09:30:00,dr-a,\n",
        )
        table = load_table(path, make_config())
        assert table.columns["duration"] == [None]


class TestIngestionConfig:
    def test_rejects_unknown_type(self):
        with pytest.raises(ConfigError):
            make_config(columns={"ts": "timestamp", "x": "blob"})

    def test_rejects_non_timestamp_primary(self):
        with pytest.raises(ConfigError):
            make_config(timestamp_column="duration")


class TestParseFilter:
    def test_single_predicate(self):
        f = parse_filter("age < 30")
        assert len(f.predicates) == 1
        assert f.predicates[0].op == "<"
        assert f.predicates[0].literal == 30.0

    def test_conjunction(self):
        f = parse_filter("ts_weekday == 'Mon' and ts_hour < 12")
        assert len(f.predicates) == 2

    def test_in_list(self):
        f = parse_filter("ts_weekday in ('Sat', 'Sun')")
        assert f.predicates[0].literal == ("Sat", "Sun")

    def test_bad_operator(self):
        with pytest.raises(FilterSyntaxError):
            parse_filter("age <> 30")

    def test_error_carries_position(self):
        with pytest.raises(FilterSyntaxError) as err:
            parse_filter("age == ")
        assert err.value.position == 7

    def test_trailing_garbage(self):
        with pytest.raises(FilterSyntaxError):
            parse_filter("age < 30 or age > 50")


@pytest.fixture
def small_table(tmp_path):
    rows = [
        ("2024-01-01T09:00:00", "dr-a", "1"),  # Mon
        ("2024-01-01T10:00:00", "dr-b", "2"),  # Mon
        ("2024-01-02T11:00:00", "dr-a", "3"),
        ("2024-01-03T12:00:00", "dr-b", "4"),
        ("2024-01-04T13:00:00", "dr-a", "5"),
    ]
    text = "ts,physician,duration\n" + "".join(",".join(r) + "\n" for r in rows)
    return load_table(write_csv(tmp_path, text), make_config())


class TestExtractSamples:
    def test_empty_match(self, small_table):
        s = extract_samples(small_table, parse_filter("physician == 'dr-z'"), "duration")
        assert s.n_rec == 0
        assert s.values == ()
        assert s.time_span == 0.0

    def test_full_match(self, small_table):
        s = extract_samples(small_table, parse_filter("duration > 0"), "duration")
        assert s.n_rec == 5
        assert s.mean == 3.0
        assert s.time_span == pytest.approx(76.0)  # Mon 09:00 -> Thu 13:00

    def test_weekday_filter(self, small_table):
        s = extract_samples(small_table, parse_filter("ts_weekday == 'Mon'"), "duration")
        assert s.values == (1.0, 2.0)
        assert s.time_span == pytest.approx(1.0)

    def test_missing_column(self, small_table):
        with pytest.raises(DatasetError, match="not in table"):
            extract_samples(small_table, parse_filter("duration > 0"), "nope")

    def test_unknown_filter_column(self, small_table):
        with pytest.raises(DatasetError, match="unknown column"):
            extract_samples(small_table, parse_filter("agez == 'x'"), "duration")

    def test_type_mismatch_rejected(self, small_table):
        with pytest.raises(DatasetError, match="non-numeric"):
            extract_samples(small_table, parse_filter("duration == 'Mon'"), "duration")

    def test_planted_mean_recovered(self, tmp_path):
        rng = np.random.default_rng(99)
        lines = ["ts,physician,duration"]
        expected = []
        for i in range(400):
            day = i % 7
            val = rng.normal(5.0 if day == 0 else 7.0, 1.0)
            if day == 0:
                expected.append(val)
            lines.append(f"2024-01-{day + 1:02d}T10:00:00,dr-a,{val:.9f}")
        table = load_table(write_csv(tmp_path, "\n".join(lines) + "\n"), make_config())
        s = extract_samples(table, parse_filter("ts_weekday == 'Mon'"), "duration")
        # independent recomputation of the planted Monday mean
        manual = sum(round(v, 9) for v in expected) / len(expected)
        assert s.mean == pytest.approx(manual, abs=1e-9)
        assert abs(s.mean - 5.0) < 3.0 / np.sqrt(len(expected))


class TestFilterProperties:
    def test_predicate_order_irrelevant(self, small_table):
        import itertools

        preds = ["duration > 1", "duration < 5", "physician == 'dr-a'"]
        results = set()
        for perm in itertools.permutations(preds):
            f = parse_filter(" and ".join(perm))
            results.add(extract_samples(small_table, f, "duration").values)
        assert len(results) == 1

    def test_adding_predicate_is_monotone(self, small_table):
        base = parse_filter("duration > 1")
        narrowed = parse_filter("duration > 1 and physician == 'dr-a'")
        n_base = extract_samples(small_table, base, "duration").n_rec
        n_narrow = extract_samples(small_table, narrowed, "duration").n_rec
        assert n_narrow <= n_base

    def test_true_filter_returns_everything(self, small_table):
        s = extract_samples(small_table, parse_filter("duration >= 1"), "duration")
        assert s.n_rec == small_table.n_rows


def test_part_of_day_boundaries():
    assert part_of_day(6) == "morning"
    assert part_of_day(11) == "morning"
    assert part_of_day(12) == "afternoon"
    assert part_of_day(18) == "evening"
    assert part_of_day(0) == "night"
    assert part_of_day(5) == "night"
