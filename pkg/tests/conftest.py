import json

import pytest

from insightminer.pipeline import InsightSet, RunConfig, run_generate
from insightminer.synth import generate_synthetic

PROTO_SEED = 7
NULL_SEED = 42


@pytest.fixture(scope="session")
def proto_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("proto")
    generate_synthetic(out, rows=4000, seed=PROTO_SEED, preset="protocol")
    return out


@pytest.fixture(scope="session")
def proto_set(proto_dir) -> InsightSet:
    config = RunConfig(
        str(proto_dir / "bundle"),
        str(proto_dir / "data.csv"),
        str(proto_dir / "ingestion.json"),
        workers=1,
    )
    return run_generate(config)


@pytest.fixture(scope="session")
def null_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("nulldata")
    generate_synthetic(out, rows=50000, seed=NULL_SEED, preset="null")
    return out


@pytest.fixture(scope="session")
def null_set(null_dir) -> InsightSet:
    config = RunConfig(
        str(null_dir / "bundle"),
        str(null_dir / "data.csv"),
        str(null_dir / "ingestion.json"),
        workers=4,
    )
    return run_generate(config)


def write_bundle(path, schemas, measurements, contexts):
    path.mkdir(parents=True, exist_ok=True)
    (path / "schemas.json").write_text(json.dumps(schemas))
    (path / "measurements.json").write_text(json.dumps(measurements))
    (path / "contexts.json").write_text(json.dumps(contexts))
    return path


@pytest.fixture
def tiny_bundle_dir(tmp_path):
    schemas = [
        {
            "schema_id": "s1",
            "template": "On {context:1}, {measurement} {tense(be,3)} {comparison} "
            "on {context:2} ({mean:1} vs {mean:2})",
            "scoring_type": "distribution_compare",
            "applicable_items": ["duration"],
        }
    ]
    measurements = [
        {
            "measurement_id": "duration",
            "surface_form": "the duration of an exam",
            "unit": "hours",
            "column": "duration",
            "tolerance_tau": 1.0,
            "expected_rate_f_exp": 1.0,
            "decimals": 2,
        }
    ]
    contexts = [
        {
            "context_id": "c_mon",
            "surface_form": "Mondays",
            "filter": "ts_weekday == 'Mon'",
            "pair_id": "wd",
        },
        {
            "context_id": "c_other",
            "surface_form": "the other days",
            "filter": "ts_weekday != 'Mon'",
            "pair_id": "wd",
        },
    ]
    return write_bundle(tmp_path / "bundle", schemas, measurements, contexts)
