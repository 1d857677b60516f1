"""Schema bundle parsing, validation, and candidate enumeration.

A bundle is a directory of three JSON documents: schemas.json,
measurements.json, contexts.json. Everything is immutable after parse and
safe to share across workers.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .dataset import FilterExpr, parse_filter
from .errors import BundleError
from .stats import TestMethod

REQUIRED_PLACEHOLDERS = ("{measurement}", "{context:1}", "{context:2}")

_PLACEHOLDER_RE = re.compile(r"\{[^{}]+\}")


class ScoringType(str, Enum):
    DISTRIBUTION_COMPARE = "distribution_compare"
    FREQUENCY_COMPARE = "frequency_compare"
    SCALAR_COMPARE = "scalar_compare"

    @property
    def test_method(self) -> TestMethod:
        return _SCORING_TEST[self]


# each scoring type maps to exactly one statistical test
_SCORING_TEST = {
    ScoringType.DISTRIBUTION_COMPARE: TestMethod.KS_TWO_SAMPLE,
    ScoringType.SCALAR_COMPARE: TestMethod.MANN_WHITNEY_U,
    ScoringType.FREQUENCY_COMPARE: TestMethod.BINOMIAL_EXACT,
}


class Tense(str, Enum):
    PRESENT = "present"
    PAST = "past"


class Direction(str, Enum):
    GREATER = "greater"
    LOWER = "lower"


@dataclass(frozen=True)
class InsightSchema:
    schema_id: str
    template: str
    scoring_type: ScoringType
    applicable_items: tuple[str, ...]
    direction: Direction = Direction.GREATER  # claimed ordering of context 1 vs 2

    def __post_init__(self):
        for ph in REQUIRED_PLACEHOLDERS:
            if ph not in self.template:
                raise BundleError(
                    f"schema {self.schema_id!r}: template missing placeholder {ph}"
                )


@dataclass(frozen=True)
class MeasurementDef:
    measurement_id: str
    surface_form: str
    unit: str
    column: str
    tolerance_tau: float
    expected_rate_f_exp: float  # samples per time unit
    decimals: int = 2

    def __post_init__(self):
        if self.tolerance_tau <= 0:
            raise BundleError(f"measurement {self.measurement_id!r}: tolerance_tau must be > 0")
        if self.expected_rate_f_exp <= 0:
            raise BundleError(
                f"measurement {self.measurement_id!r}: expected_rate_f_exp must be > 0"
            )
        if self.decimals < 0:
            raise BundleError(f"measurement {self.measurement_id!r}: decimals must be >= 0")


@dataclass(frozen=True)
class ContextDef:
    context_id: str
    surface_form: str
    filter: FilterExpr
    pair_id: str
    tense: Tense = Tense.PRESENT

    def __post_init__(self):
        if not self.surface_form:
            raise BundleError(f"context {self.context_id!r}: surface_form must be non-empty")


@dataclass(frozen=True)
class SchemaBundle:
    schemas: tuple[InsightSchema, ...]
    measurements: tuple[MeasurementDef, ...]
    contexts: tuple[ContextDef, ...]
    _by_measurement: dict = field(default_factory=dict, repr=False, compare=False)
    _by_context: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        for kind, items, key in (
            ("schema", self.schemas, "schema_id"),
            ("measurement", self.measurements, "measurement_id"),
            ("context", self.contexts, "context_id"),
        ):
            ids = [getattr(x, key) for x in items]
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            if dupes:
                raise BundleError(f"duplicate {kind} id(s): {', '.join(dupes)}")
        self._by_measurement.update({m.measurement_id: m for m in self.measurements})
        self._by_context.update({c.context_id: c for c in self.contexts})
        for schema in self.schemas:
            for item in schema.applicable_items:
                if item not in self._by_measurement:
                    raise BundleError(
                        f"schema {schema.schema_id!r} references unknown measurement {item!r}"
                    )
        pair_sizes: dict[str, int] = {}
        for ctx in self.contexts:
            pair_sizes[ctx.pair_id] = pair_sizes.get(ctx.pair_id, 0) + 1
        lonely = sorted(p for p, n in pair_sizes.items() if n < 2)
        if lonely:
            raise BundleError(f"pair id(s) with fewer than two contexts: {', '.join(lonely)}")

    def measurement(self, measurement_id: str) -> MeasurementDef:
        try:
            return self._by_measurement[measurement_id]
        except KeyError:
            raise BundleError(f"unknown measurement id {measurement_id!r}") from None

    def context(self, context_id: str) -> ContextDef:
        try:
            return self._by_context[context_id]
        except KeyError:
            raise BundleError(f"unknown context id {context_id!r}") from None

    def schema(self, schema_id: str) -> InsightSchema:
        for s in self.schemas:
            if s.schema_id == schema_id:
                return s
        raise BundleError(f"unknown schema id {schema_id!r}")

    def pairs(self) -> dict[str, list[ContextDef]]:
        out: dict[str, list[ContextDef]] = {}
        for ctx in self.contexts:
            out.setdefault(ctx.pair_id, []).append(ctx)
        return out


@dataclass(frozen=True)
class CandidateSpec:
    candidate_id: str
    schema_id: str
    measurement_id: str
    context1_id: str
    context2_id: str

    def to_dict(self) -> dict:
        return {
            "candidate_id": self.candidate_id,
            "schema_id": self.schema_id,
            "measurement_id": self.measurement_id,
            "context1_id": self.context1_id,
            "context2_id": self.context2_id,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CandidateSpec":
        return cls(
            d["candidate_id"], d["schema_id"], d["measurement_id"],
            d["context1_id"], d["context2_id"],
        )


def candidate_id_for(schema_id: str, measurement_id: str, c1: str, c2: str) -> str:
    """First 16 hex chars of SHA-256 over the canonical pipe-joined key;
    stable across runs and machines so feedback can join on it."""
    key = f"{schema_id}|{measurement_id}|{c1}|{c2}"
    return hashlib.sha256(key.encode()).hexdigest()[:16]


def _load_json(path: Path) -> list:
    if not path.exists():
        raise BundleError(f"bundle file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise BundleError(f"{path.name}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(data, list):
        raise BundleError(f"{path.name}: expected a top-level JSON list")
    return data


def _require(record: dict, key: str, where: str):
    if key not in record:
        raise BundleError(f"{where}: missing field {key!r}")
    return record[key]


def parse_bundle(bundle_dir: str | Path) -> SchemaBundle:
    """Parse schemas.json, measurements.json and contexts.json from a directory
    into a fully cross-linked SchemaBundle."""
    bundle_dir = Path(bundle_dir)
    schemas = []
    for rec in _load_json(bundle_dir / "schemas.json"):
        where = f"schemas.json ({rec.get('schema_id', '?')})"
        try:
            scoring = ScoringType(_require(rec, "scoring_type", where))
        except ValueError:
            raise BundleError(f"{where}: unknown scoring_type {rec['scoring_type']!r}") from None
        schemas.append(
            InsightSchema(
                schema_id=_require(rec, "schema_id", where),
                template=_require(rec, "template", where),
                scoring_type=scoring,
                applicable_items=tuple(_require(rec, "applicable_items", where)),
                direction=Direction(rec.get("direction", "greater")),
            )
        )
    measurements = []
    for rec in _load_json(bundle_dir / "measurements.json"):
        where = f"measurements.json ({rec.get('measurement_id', '?')})"
        measurements.append(
            MeasurementDef(
                measurement_id=_require(rec, "measurement_id", where),
                surface_form=_require(rec, "surface_form", where),
                unit=_require(rec, "unit", where),
                column=_require(rec, "column", where),
                tolerance_tau=float(_require(rec, "tolerance_tau", where)),
                expected_rate_f_exp=float(_require(rec, "expected_rate_f_exp", where)),
                decimals=int(rec.get("decimals", 2)),
            )
        )
    contexts = []
    for rec in _load_json(bundle_dir / "contexts.json"):
        where = f"contexts.json ({rec.get('context_id', '?')})"
        contexts.append(
            ContextDef(
                context_id=_require(rec, "context_id", where),
                surface_form=_require(rec, "surface_form", where),
                filter=parse_filter(_require(rec, "filter", where)),
                pair_id=_require(rec, "pair_id", where),
                tense=Tense(rec.get("tense", "present")),
            )
        )
    return SchemaBundle(tuple(schemas), tuple(measurements), tuple(contexts))


def serialize_bundle(bundle: SchemaBundle, bundle_dir: str | Path) -> None:
    """Write the three bundle documents; inverse of parse_bundle."""
    bundle_dir = Path(bundle_dir)
    bundle_dir.mkdir(parents=True, exist_ok=True)
    schemas = [
        {
            "schema_id": s.schema_id,
            "template": s.template,
            "scoring_type": s.scoring_type.value,
            "applicable_items": list(s.applicable_items),
            "direction": s.direction.value,
        }
        for s in bundle.schemas
    ]
    measurements = [
        {
            "measurement_id": m.measurement_id,
            "surface_form": m.surface_form,
            "unit": m.unit,
            "column": m.column,
            "tolerance_tau": m.tolerance_tau,
            "expected_rate_f_exp": m.expected_rate_f_exp,
            "decimals": m.decimals,
        }
        for m in bundle.measurements
    ]
    contexts = [
        {
            "context_id": c.context_id,
            "surface_form": c.surface_form,
            "filter": c.filter.text,
            "pair_id": c.pair_id,
            "tense": c.tense.value,
        }
        for c in bundle.contexts
    ]
    for name, data in (
        ("schemas.json", schemas),
        ("measurements.json", measurements),
        ("contexts.json", contexts),
    ):
        (bundle_dir / name).write_text(json.dumps(data, indent=2) + "\n")


def enumerate_candidates(bundle: SchemaBundle) -> list[CandidateSpec]:
    """One CandidateSpec per (schema, applicable measurement, ordered pair of
    distinct contexts sharing a pair_id), sorted by candidate_id."""
    out = []
    pairs = bundle.pairs()
    for schema in bundle.schemas:
        for measurement_id in schema.applicable_items:
            for members in pairs.values():
                for c1 in members:
                    for c2 in members:
                        if c1.context_id == c2.context_id:
                            continue
                        cid = candidate_id_for(
                            schema.schema_id, measurement_id, c1.context_id, c2.context_id
                        )
                        out.append(
                            CandidateSpec(
                                cid, schema.schema_id, measurement_id,
                                c1.context_id, c2.context_id,
                            )
                        )
    out.sort(key=lambda c: c.candidate_id)
    return out
