"""Synthetic dataset + bundle generator.

Produces desk-scale datasets with known ground truth: a calibration preset
with no planted effects, a minimal planted-shift preset, and a richer
"protocol" preset used by the feedback-adaptation tests. Each run writes a
data CSV, an ingestion config, a schema bundle directory, and a ground-truth
sidecar listing the planted mean shifts.
"""

from __future__ import annotations

import csv
import json
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .schema_model import (
    ContextDef,
    Direction,
    InsightSchema,
    MeasurementDef,
    SchemaBundle,
    ScoringType,
    serialize_bundle,
)
from .dataset import parse_filter

PRESETS = ("null", "planted", "protocol")

_BASE_TS = datetime(2024, 1, 1, 0, 0, 0)
_SPAN_DAYS = 30

_TEMPLATE = (
    "{context:1}, {measurement} {tense(be,3)} {comparison} {context:2} "
    "({mean:1} vs {mean:2})"
)


def _agent_contexts(n: int) -> list[ContextDef]:
    out = []
    for i in range(n):
        name = f"agent-{i:02d}"
        out.append(
            ContextDef(
                context_id=f"ctx_{name}",
                surface_form=f"with {name}",
                filter=parse_filter(f"agent == '{name}'"),
                pair_id="agents",
            )
        )
    return out


def _weekday_contexts() -> list[ContextDef]:
    return [
        ContextDef(
            "ctx_monday", "on Mondays", parse_filter("ts_weekday == 'Mon'"), "weekday_split"
        ),
        ContextDef(
            "ctx_otherdays",
            "on the other days",
            parse_filter("ts_weekday != 'Mon'"),
            "weekday_split",
        ),
    ]


def _daypart_contexts() -> list[ContextDef]:
    return [
        ContextDef(
            "ctx_morning",
            "in the morning",
            parse_filter("ts_part_of_day == 'morning'"),
            "daypart",
        ),
        ContextDef(
            "ctx_afternoon",
            "in the afternoon",
            parse_filter("ts_part_of_day == 'afternoon'"),
            "daypart",
        ),
    ]


def _measurements(scale_f_exp: float) -> list[MeasurementDef]:
    return [
        MeasurementDef(
            measurement_id="duration",
            surface_form="the duration of an exam",
            unit="hours",
            column="duration",
            tolerance_tau=1.0,
            expected_rate_f_exp=scale_f_exp,
            decimals=2,
        ),
        MeasurementDef(
            measurement_id="dose",
            surface_form="the radiation dose",
            unit="mGy",
            column="dose",
            tolerance_tau=0.5,
            expected_rate_f_exp=scale_f_exp,
            decimals=2,
        ),
    ]


def _bucket_contexts(n_buckets: int) -> list[ContextDef]:
    """Disjoint two-context pairs over a fine categorical column, so the
    calibration tests are mutually independent."""
    out = []
    for i in range(n_buckets):
        name = f"b{i:03d}"
        out.append(
            ContextDef(
                context_id=f"ctx_{name}",
                surface_form=f"in segment {name}",
                filter=parse_filter(f"bucket == '{name}'"),
                pair_id=f"pair{i // 2:03d}",
            )
        )
    return out


NULL_BUCKETS = 500


def _null_bundle() -> SchemaBundle:
    contexts = _bucket_contexts(NULL_BUCKETS)
    schemas = [
        InsightSchema(
            "dist_duration", _TEMPLATE, ScoringType.DISTRIBUTION_COMPARE, ("duration",),
            Direction.GREATER,
        ),
        InsightSchema(
            "rank_dose", _TEMPLATE, ScoringType.SCALAR_COMPARE, ("dose",), Direction.GREATER
        ),
        InsightSchema(
            "freq_duration", _TEMPLATE, ScoringType.FREQUENCY_COMPARE, ("duration",),
            Direction.GREATER,
        ),
    ]
    return SchemaBundle(tuple(schemas), tuple(_measurements(0.3)), tuple(contexts))


def _planted_bundle() -> SchemaBundle:
    contexts = _weekday_contexts()
    schemas = [
        InsightSchema(
            "dist_duration", _TEMPLATE, ScoringType.DISTRIBUTION_COMPARE, ("duration",),
            Direction.GREATER,
        ),
    ]
    return SchemaBundle(tuple(schemas), (_measurements(0.5)[0],), tuple(contexts))


def _protocol_bundle() -> SchemaBundle:
    contexts = _agent_contexts(8) + _daypart_contexts() + _weekday_contexts()
    schemas = [
        InsightSchema(
            "dist_compare", _TEMPLATE, ScoringType.DISTRIBUTION_COMPARE,
            ("duration", "dose"), Direction.GREATER,
        ),
        InsightSchema(
            "rank_compare", _TEMPLATE, ScoringType.SCALAR_COMPARE,
            ("duration", "dose"), Direction.GREATER,
        ),
    ]
    return SchemaBundle(tuple(schemas), tuple(_measurements(0.5)), tuple(contexts))


def _protocol_effects() -> list[dict]:
    effects = [
        {"measurement": "duration", "column": "agent", "value": f"agent-{i:02d}",
         "shift": 0.6 * i}
        for i in range(8)
    ]
    effects += [
        {"measurement": "dose", "column": "agent", "value": f"agent-{i:02d}",
         "shift": 0.25 * ((i * 3) % 8)}
        for i in range(8)
    ]
    effects.append(
        {"measurement": "duration", "column": "part_of_day", "value": "morning", "shift": 1.5}
    )
    effects.append({"measurement": "dose", "column": "weekday", "value": "Mon", "shift": 1.0})
    return effects


def generate_synthetic(
    out_dir: str | Path, rows: int = 2000, seed: int = 0, preset: str = "protocol"
) -> Path:
    """Write data.csv, ingestion.json, bundle/ and ground_truth.json under
    out_dir and return the directory path."""
    if rows < 100:
        raise ConfigError(f"rows must be >= 100, got {rows}")
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; choose one of {PRESETS}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    if preset == "null":
        bundle = _null_bundle()
        n_agents = 25
        effects: list[dict] = []
    elif preset == "planted":
        bundle = _planted_bundle()
        n_agents = 5
        effects = [
            {"measurement": "duration", "column": "weekday", "value": "Mon", "shift": 2.0}
        ]
    else:
        bundle = _protocol_bundle()
        n_agents = 8
        effects = _protocol_effects()

    agents = [f"agent-{i:02d}" for i in range(n_agents)]
    buckets = [f"b{i:03d}" for i in range(NULL_BUCKETS if preset == "null" else 4)]
    seconds = rng.uniform(0, _SPAN_DAYS * 86400, size=rows)
    stamps = [_BASE_TS + timedelta(seconds=float(int(s))) for s in seconds]
    agent_col = rng.choice(agents, size=rows)
    bucket_col = rng.choice(buckets, size=rows)
    age_col = rng.uniform(20, 80, size=rows)
    duration = rng.normal(10.0, 1.0, size=rows)
    dose = rng.normal(5.0, 0.5, size=rows)
    if preset == "null":
        duration = rng.normal(10.0, 2.0, size=rows)
        dose = rng.normal(5.0, 1.0, size=rows)

    from .dataset import WEEKDAY_NAMES, part_of_day

    for eff in effects:
        target = duration if eff["measurement"] == "duration" else dose
        for i in range(rows):
            if eff["column"] == "agent":
                hit = agent_col[i] == eff["value"]
            elif eff["column"] == "weekday":
                hit = WEEKDAY_NAMES[stamps[i].weekday()] == eff["value"]
            else:
                hit = part_of_day(stamps[i].hour) == eff["value"]
            if hit:
                target[i] += eff["shift"]

    with (out_dir / "data.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["ts", "agent", "bucket", "age", "duration", "dose"])
        for i in range(rows):
            writer.writerow(
                [
                    stamps[i].isoformat(),
                    agent_col[i],
                    bucket_col[i],
                    f"{age_col[i]:.1f}",
                    f"{duration[i]:.6f}",
                    f"{dose[i]:.6f}",
                ]
            )

    ingestion = {
        "columns": {
            "ts": "timestamp",
            "agent": "categorical",
            "bucket": "categorical",
            "age": "numeric",
            "duration": "numeric",
            "dose": "numeric",
        },
        "timestamp_column": "ts",
        "time_unit": "hours",
    }
    (out_dir / "ingestion.json").write_text(json.dumps(ingestion, indent=2) + "\n")

    serialize_bundle(bundle, out_dir / "bundle")

    ground_truth = {"preset": preset, "rows": rows, "seed": seed, "effects": effects}
    (out_dir / "ground_truth.json").write_text(json.dumps(ground_truth, indent=2) + "\n")
    return out_dir
