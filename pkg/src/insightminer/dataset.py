"""CSV ingestion with typed columns, derived temporal columns, and the
conjunctive filter DSL used by context definitions.
"""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

import numpy as np

_EPOCH = datetime(1970, 1, 1)

from .errors import ConfigError, DatasetError, FilterSyntaxError

WEEKDAY_NAMES = ["Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun"]

COLUMN_TYPES = ("numeric", "categorical", "timestamp")

# seconds per declared time unit, used to express time spans for Score_C
TIME_UNITS = {"hours": 3600.0, "minutes": 60.0, "seconds": 1.0, "days": 86400.0}


def part_of_day(hour: int) -> str:
    if 6 <= hour < 12:
        return "morning"
    if 12 <= hour < 18:
        return "afternoon"
    if 18 <= hour < 24:
        return "evening"
    return "night"


@dataclass(frozen=True)
class IngestionConfig:
    columns: dict[str, str]  # column name -> type
    timestamp_column: str
    time_unit: str = "hours"

    def __post_init__(self):
        for name, ctype in self.columns.items():
            if ctype not in COLUMN_TYPES:
                raise ConfigError(f"unknown column type {ctype!r} for column {name!r}")
        if self.timestamp_column not in self.columns:
            raise ConfigError(f"timestamp column {self.timestamp_column!r} not declared")
        if self.columns[self.timestamp_column] != "timestamp":
            raise ConfigError(f"column {self.timestamp_column!r} is not a timestamp")
        if self.time_unit not in TIME_UNITS:
            raise ConfigError(f"unknown time unit {self.time_unit!r}")

    @classmethod
    def from_file(cls, path: str | Path) -> "IngestionConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"ingestion config not found: {path}")
        raw = json.loads(path.read_text())
        return cls(
            columns=dict(raw["columns"]),
            timestamp_column=raw["timestamp_column"],
            time_unit=raw.get("time_unit", "hours"),
        )


@dataclass
class Table:
    """Immutable after load; derived temporal columns are materialized eagerly."""

    columns: dict[str, list]  # includes derived columns
    column_types: dict[str, str]
    primary_timestamp: str
    time_unit: str = "hours"
    n_rows: int = field(init=False)
    _arrays: dict = field(init=False, default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        lengths = {len(v) for v in self.columns.values()}
        if len(lengths) > 1:
            raise DatasetError("ragged table: columns differ in length")
        self.n_rows = lengths.pop() if lengths else 0

    def has_column(self, name: str) -> bool:
        return name in self.columns

    def column_array(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        """(values, validity) arrays for vectorized filtering; numeric and
        timestamp columns become floats (epoch seconds), missing -> NaN."""
        if name not in self._arrays:
            values = self.columns[name]
            ctype = self.column_types[name]
            if ctype == "numeric":
                arr = np.array([np.nan if v is None else v for v in values], dtype=float)
                valid = ~np.isnan(arr)
            elif ctype == "timestamp":
                arr = np.array(
                    [np.nan if v is None else (v - _EPOCH).total_seconds() for v in values],
                    dtype=float,
                )
                valid = ~np.isnan(arr)
            else:
                arr = np.array(values, dtype=object)
                valid = np.array([v is not None for v in values], dtype=bool)
            self._arrays[name] = (arr, valid)
        return self._arrays[name]


def _parse_cell(raw: str, ctype: str, row: int, col: str):
    if raw == "":
        return None
    if ctype == "numeric":
        try:
            return float(raw)
        except ValueError:
            raise DatasetError(
                f"unparseable numeric value {raw!r} at row {row}, column {col!r}"
            ) from None
    if ctype == "timestamp":
        try:
            return datetime.fromisoformat(raw)
        except ValueError:
            raise DatasetError(
                f"unparseable timestamp {raw!r} at row {row}, column {col!r}"
            ) from None
    return raw


def load_table(path: str | Path, config: IngestionConfig) -> Table:
    """Load a CSV file into a typed Table with derived temporal columns.

    For every declared timestamp column ``c``, adds ``c_weekday`` (Mon..Sun),
    ``c_hour`` (0..23) and ``c_part_of_day`` (morning/afternoon/evening/night).
    Data rows are numbered from 1 in error messages (the header is row 0).
    """
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"data file not found: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"empty data file: {path}") from None
        if len(set(header)) != len(header):
            dupes = sorted({c for c in header if header.count(c) > 1})
            raise DatasetError(f"duplicate column name(s): {', '.join(dupes)}")
        missing = [c for c in config.columns if c not in header]
        if missing:
            raise DatasetError(f"declared column(s) missing from header: {', '.join(missing)}")
        columns: dict[str, list] = {c: [] for c in config.columns}
        idx = {c: header.index(c) for c in config.columns}
        for row_no, record in enumerate(reader, start=1):
            if len(record) != len(header):
                raise DatasetError(f"row {row_no} has {len(record)} fields, expected {len(header)}")
            for col, ctype in config.columns.items():
                columns[col].append(_parse_cell(record[idx[col]], ctype, row_no, col))
    column_types = dict(config.columns)
    for col, ctype in config.columns.items():
        if ctype != "timestamp":
            continue
        weekdays, hours, parts = [], [], []
        for ts in columns[col]:
            if ts is None:
                weekdays.append(None)
                hours.append(None)
                parts.append(None)
            else:
                weekdays.append(WEEKDAY_NAMES[ts.weekday()])
                hours.append(float(ts.hour))
                parts.append(part_of_day(ts.hour))
        columns[f"{col}_weekday"] = weekdays
        columns[f"{col}_hour"] = hours
        columns[f"{col}_part_of_day"] = parts
        column_types[f"{col}_weekday"] = "categorical"
        column_types[f"{col}_hour"] = "numeric"
        column_types[f"{col}_part_of_day"] = "categorical"
    return Table(columns, column_types, config.timestamp_column, config.time_unit)


# --- filter DSL ---------------------------------------------------------------

OPERATORS = ("==", "!=", "<=", ">=", "<", ">", "in")

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<op>==|!=|<=|>=|<|>)
  | (?P<num>-?\d+(\.\d+)?([eE][+-]?\d+)?)
  | (?P<str>'[^']*'|"[^"]*")
  | (?P<ident>[A-Za-z_][A-Za-z0-9_\-]*)
  | (?P<punct>[()\[\],])
""",
    re.VERBOSE,
)


@dataclass(frozen=True)
class Predicate:
    column: str
    op: str
    literal: object  # float, str, or tuple of those for `in`

    def matches(self, value) -> bool:
        if value is None:
            return False
        if self.op == "==":
            return value == self.literal
        if self.op == "!=":
            return value != self.literal
        if self.op == "<":
            return value < self.literal
        if self.op == "<=":
            return value <= self.literal
        if self.op == ">":
            return value > self.literal
        if self.op == ">=":
            return value >= self.literal
        return value in self.literal


@dataclass(frozen=True)
class FilterExpr:
    """Conjunction of `column op literal` predicates. No OR, no nesting;
    disjunctive contexts use `in` lists instead."""

    predicates: tuple[Predicate, ...]
    text: str

    def validate(self, table: Table) -> None:
        for pred in self.predicates:
            if not table.has_column(pred.column):
                raise DatasetError(f"filter references unknown column {pred.column!r}")
            ctype = table.column_types[pred.column]
            literals = pred.literal if pred.op == "in" else (pred.literal,)
            for lit in literals:
                if ctype == "numeric" and not isinstance(lit, float):
                    raise DatasetError(
                        f"numeric column {pred.column!r} compared to non-numeric literal {lit!r}"
                    )
                if ctype == "categorical" and not isinstance(lit, str):
                    raise DatasetError(
                        f"categorical column {pred.column!r} compared to non-string literal {lit!r}"
                    )

    def row_matches(self, table: Table, row: int) -> bool:
        return all(p.matches(table.columns[p.column][row]) for p in self.predicates)

    def mask(self, table: Table) -> np.ndarray:
        """Vectorized row mask; missing values never match a predicate."""
        out = np.ones(table.n_rows, dtype=bool)
        for pred in self.predicates:
            arr, valid = table.column_array(pred.column)
            op = pred.op
            if op == "==":
                hit = arr == pred.literal
            elif op == "!=":
                hit = arr != pred.literal
            elif op == "in":
                hit = np.isin(arr, pred.literal)
            else:
                # ordering ops: compare only valid entries (object arrays may hold None)
                hit = np.zeros(table.n_rows, dtype=bool)
                idx = np.flatnonzero(valid)
                sub = arr[idx]
                if op == "<":
                    hit[idx] = sub < pred.literal
                elif op == "<=":
                    hit[idx] = sub <= pred.literal
                elif op == ">":
                    hit[idx] = sub > pred.literal
                else:
                    hit[idx] = sub >= pred.literal
            out &= hit & valid
        return out


class _Tokens:
    def __init__(self, text: str):
        self.text = text
        self.items: list[tuple[str, str, int]] = []
        pos = 0
        while pos < len(text):
            m = _TOKEN_RE.match(text, pos)
            if m is None:
                raise FilterSyntaxError(f"unexpected character {text[pos]!r}", pos)
            if m.lastgroup != "ws":
                self.items.append((m.lastgroup, m.group(), pos))
            pos = m.end()
        self.i = 0

    def peek(self):
        return self.items[self.i] if self.i < len(self.items) else (None, "", len(self.text))

    def next(self):
        tok = self.peek()
        self.i += 1
        return tok


def _parse_literal(tokens: _Tokens):
    kind, value, pos = tokens.next()
    if kind == "num":
        return float(value)
    if kind == "str":
        return value[1:-1]
    raise FilterSyntaxError(f"expected a literal, found {value!r}", pos)


def parse_filter(text: str) -> FilterExpr:
    """Parse `pred [and pred]*` where pred is `column op literal` or
    `column in (lit, lit, ...)`."""
    tokens = _Tokens(text)
    predicates = []
    while True:
        kind, value, pos = tokens.next()
        if kind != "ident":
            raise FilterSyntaxError(f"expected a column name, found {value!r}", pos)
        column = value
        kind, op, pos = tokens.next()
        if kind == "ident" and op == "in":
            kind, bracket, pos = tokens.next()
            if bracket not in ("(", "["):
                raise FilterSyntaxError(f"expected a list after 'in', found {bracket!r}", pos)
            closer = ")" if bracket == "(" else "]"
            members = [_parse_literal(tokens)]
            while True:
                kind, value, pos = tokens.next()
                if value == closer:
                    break
                if value != ",":
                    raise FilterSyntaxError(f"expected ',' or {closer!r}, found {value!r}", pos)
                members.append(_parse_literal(tokens))
            predicates.append(Predicate(column, "in", tuple(members)))
        elif kind == "op":
            predicates.append(Predicate(column, op, _parse_literal(tokens)))
        else:
            raise FilterSyntaxError(f"expected an operator, found {op!r}", pos)
        kind, value, pos = tokens.peek()
        if kind is None:
            break
        if kind == "ident" and value == "and":
            tokens.next()
            continue
        raise FilterSyntaxError(f"expected 'and' or end of filter, found {value!r}", pos)
    return FilterExpr(tuple(predicates), text)


# --- sample extraction --------------------------------------------------------


@dataclass(frozen=True)
class SampleSet:
    values: tuple[float, ...]
    n_rec: int
    time_span: float  # in the table's declared time unit; 0 if < 2 timestamps
    mean: float  # 0.0 when empty

    def to_dict(self) -> dict:
        return {"n_rec": self.n_rec, "time_span": self.time_span, "mean": self.mean}


def extract_samples(table: Table, filt: FilterExpr, measurement_column: str) -> SampleSet:
    """Measurement values over the rows matching the filter, missing values dropped.

    The time span is max - min of the table's primary timestamp over all
    matching rows, expressed in the declared time unit.
    """
    if not table.has_column(measurement_column):
        raise DatasetError(f"measurement column {measurement_column!r} not in table")
    if table.column_types[measurement_column] != "numeric":
        raise DatasetError(f"measurement column {measurement_column!r} is not numeric")
    filt.validate(table)
    mask = filt.mask(table)
    meas, meas_valid = table.column_array(measurement_column)
    values = meas[mask & meas_valid]
    stamps, ts_valid = table.column_array(table.primary_timestamp)
    matched_ts = stamps[mask & ts_valid]
    span = 0.0
    if matched_ts.size >= 2:
        span = float(matched_ts.max() - matched_ts.min()) / TIME_UNITS[table.time_unit]
    mean = float(values.mean()) if values.size else 0.0
    return SampleSet(tuple(float(v) for v in values), int(values.size), span, mean)
