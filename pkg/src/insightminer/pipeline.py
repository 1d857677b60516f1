"""End-to-end orchestration: generate -> test -> score -> featurize -> realize,
serially or over a fork-based work pool, with bytewise-deterministic output.
"""

from __future__ import annotations

import json
import logging
import multiprocessing as mp
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .dataset import IngestionConfig, SampleSet, Table, extract_samples, load_table
from .errors import InputError, InsightError
from .features import (
    FeatureVector,
    Standardization,
    Vocabulary,
    build_vocabulary,
    featurize,
    fit_standardization,
    pca_project,
)
from .realization import format_quantity, percent_diff, realize
from .recommender import (
    RATING_LABELS,
    TrainConfig,
    UsefulnessModel,
    knn_pseudo_label,
    select_diverse,
    train_usefulness_model,
)
from .schema_model import (
    CandidateSpec,
    Direction,
    SchemaBundle,
    Tense,
    enumerate_candidates,
    parse_bundle,
)
from .scoring import ScoreBreakdown, ScoringConfig, aligned_delta, score_candidate
from .stats import TestMethod, TestResult, binomial_test, ks_two_sample, mann_whitney_u

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
DEFAULT_TOP_K = 23
DEFAULT_KNN_K = 5


@dataclass(frozen=True)
class RunConfig:
    bundle_dir: str
    data_path: str
    ingestion_path: str
    out_path: str = ""
    alpha: float = 0.05
    gamma: float = 6.0
    workers: int = 1
    seed: int = 0
    lenient: bool = False

    def __post_init__(self):
        if self.workers < 1:
            raise InputError(f"workers must be >= 1, got {self.workers}")
        if not (0.0 < self.alpha < 1.0):
            raise InputError(f"alpha must lie in (0,1), got {self.alpha}")


@dataclass(frozen=True)
class ScoredInsight:
    candidate_id: str
    schema_id: str
    measurement_id: str
    context1_id: str
    context2_id: str
    text: str
    test: TestResult
    scores: ScoreBreakdown
    features: FeatureVector
    samples: dict  # per-context n_rec / mean / time_span summary

    def to_dict(self) -> dict:
        return {
            "candidate_id": self.candidate_id,
            "schema_id": self.schema_id,
            "measurement_id": self.measurement_id,
            "context1_id": self.context1_id,
            "context2_id": self.context2_id,
            "text": self.text,
            "test": self.test.to_dict(),
            "scores": self.scores.to_dict(),
            "features": self.features.to_dict(),
            "samples": self.samples,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScoredInsight":
        return cls(
            d["candidate_id"], d["schema_id"], d["measurement_id"],
            d["context1_id"], d["context2_id"], d["text"],
            TestResult.from_dict(d["test"]),
            ScoreBreakdown.from_dict(d["scores"]),
            FeatureVector.from_dict(d["features"]),
            d["samples"],
        )

    def with_usefulness(self, score_u: float) -> "ScoredInsight":
        return replace(self, scores=self.scores.with_usefulness(score_u))


@dataclass
class InsightSet:
    metadata: dict
    insights: list[ScoredInsight]

    @property
    def truthful(self) -> list[ScoredInsight]:
        return [i for i in self.insights if i.scores.truthful]

    def vocabulary(self) -> Vocabulary:
        return Vocabulary(tuple(self.metadata["vocabulary"]))

    def standardization(self) -> Standardization:
        return Standardization.from_dict(self.metadata["standardization"])

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "metadata": self.metadata,
            "insights": [i.to_dict() for i in self.insights],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def from_dict(cls, d: dict) -> "InsightSet":
        if d.get("schema_version") != SCHEMA_VERSION:
            raise InputError(f"unsupported insight file schema_version: {d.get('schema_version')}")
        return cls(d["metadata"], [ScoredInsight.from_dict(i) for i in d["insights"]])

    @classmethod
    def load(cls, path: str | Path) -> "InsightSet":
        path = Path(path)
        if not path.exists():
            raise InputError(f"insight file not found: {path}")
        return cls.from_dict(json.loads(path.read_text()))


def run_test(method: TestMethod, s1: SampleSet, s2: SampleSet) -> TestResult:
    if method is TestMethod.BINOMIAL_EXACT:
        n = s1.n_rec + s2.n_rec
        if n == 0:
            raise InsightError("both contexts are empty")
        return binomial_test(s1.n_rec, n, 0.5)
    if s1.n_rec == 0 or s2.n_rec == 0:
        raise InsightError("a context has no samples")
    if method is TestMethod.KS_TWO_SAMPLE:
        return ks_two_sample(list(s1.values), list(s2.values))
    return mann_whitney_u(list(s1.values), list(s2.values))


def _realize_candidate(bundle: SchemaBundle, spec: CandidateSpec, s1: SampleSet, s2: SampleSet) -> str:
    schema = bundle.schema(spec.schema_id)
    measurement = bundle.measurement(spec.measurement_id)
    c1 = bundle.context(spec.context1_id)
    c2 = bundle.context(spec.context2_id)
    tense = Tense.PAST if Tense.PAST in (c1.tense, c2.tense) else Tense.PRESENT
    comparison = "greater than" if schema.direction is Direction.GREATER else "lower than"
    binding: dict[str, object] = {
        "measurement": measurement.surface_form,
        "context:1": c1.surface_form,
        "context:2": c2.surface_form,
        "mean:1": format_quantity(s1.mean, measurement.decimals, measurement.unit),
        "mean:2": format_quantity(s2.mean, measurement.decimals, measurement.unit),
        "comparison": comparison,
        "unit": measurement.unit,
    }
    if s2.mean != 0:
        binding["percent"] = f"{percent_diff(s1.mean, s2.mean):.2f}%"
    return realize(schema.template, binding, tense)


# worker context, populated in the parent before forking the pool
_WORK: dict = {}
# per-worker memo of SampleSets; contexts recur across ordered pairs and schemas
_SAMPLE_CACHE: dict[tuple[str, str], SampleSet] = {}


def _cached_samples(context_id: str, measurement_column: str) -> SampleSet:
    key = (context_id, measurement_column)
    if key not in _SAMPLE_CACHE:
        bundle: SchemaBundle = _WORK["bundle"]
        _SAMPLE_CACHE[key] = extract_samples(
            _WORK["table"], bundle.context(context_id).filter, measurement_column
        )
    return _SAMPLE_CACHE[key]


def _evaluate(spec: CandidateSpec):
    bundle: SchemaBundle = _WORK["bundle"]
    scoring_config: ScoringConfig = _WORK["scoring"]
    schema = bundle.schema(spec.schema_id)
    measurement = bundle.measurement(spec.measurement_id)
    try:
        s1 = _cached_samples(spec.context1_id, measurement.column)
        s2 = _cached_samples(spec.context2_id, measurement.column)
        test = run_test(schema.scoring_type.test_method, s1, s2)
        scores = score_candidate(spec, schema, measurement, s1, s2, test, 1.0, scoring_config)
        text = _realize_candidate(bundle, spec, s1, s2)
    except InsightError as exc:
        if _WORK.get("lenient"):
            log.warning("skipping candidate %s: %s", spec.candidate_id, exc)
            return None
        raise InsightError(f"candidate {spec.candidate_id} failed: {exc}") from exc
    return spec, s1, s2, test, scores, text


def run_generate(config: RunConfig) -> InsightSet:
    """Evaluate every enumerated candidate and assemble a deterministic
    InsightSet; identical output for any worker count."""
    t_start = time.perf_counter()
    bundle = parse_bundle(config.bundle_dir)
    ingestion = IngestionConfig.from_file(config.ingestion_path)
    table = load_table(config.data_path, ingestion)
    candidates = enumerate_candidates(bundle)
    t_load = time.perf_counter()

    _SAMPLE_CACHE.clear()
    _WORK.update(
        bundle=bundle,
        table=table,
        scoring=ScoringConfig(config.alpha, config.gamma),
        lenient=config.lenient,
    )
    if config.workers == 1:
        raw = [_evaluate(spec) for spec in candidates]
    else:
        chunk = max(1, (len(candidates) + config.workers - 1) // config.workers)
        with mp.get_context("fork").Pool(config.workers) as pool:
            raw = pool.map(_evaluate, candidates, chunksize=chunk)
    raw = [r for r in raw if r is not None]
    t_eval = time.perf_counter()

    vocab = build_vocabulary(bundle)
    raw_means: dict[str, list[float]] = {}
    for spec, s1, s2, _, _, _ in raw:
        raw_means.setdefault(spec.measurement_id, []).extend([s1.mean, s2.mean])
    standardization = fit_standardization(raw_means)

    insights = []
    for spec, s1, s2, test, scores, text in raw:
        fv = featurize(
            spec.candidate_id, spec.schema_id, spec.measurement_id,
            spec.context1_id, spec.context2_id,
            s1.mean, s2.mean, scores.delta, scores.tau,
            vocab, standardization,
        )
        insights.append(
            ScoredInsight(
                spec.candidate_id, spec.schema_id, spec.measurement_id,
                spec.context1_id, spec.context2_id, text, test, scores, fv,
                {"context1": s1.to_dict(), "context2": s2.to_dict()},
            )
        )
    insights.sort(key=lambda i: i.candidate_id)
    t_done = time.perf_counter()

    metadata = {
        "config": {
            "bundle_dir": str(config.bundle_dir),
            "data_path": str(config.data_path),
            "ingestion_path": str(config.ingestion_path),
            "alpha": config.alpha,
            "gamma": config.gamma,
            "seed": config.seed,
            # workers deliberately omitted: it affects scheduling, not results
        },
        "counts": {
            "candidates_total": len(candidates),
            "evaluated": len(insights),
            "truthful_count": sum(1 for i in insights if i.scores.truthful),
        },
        "vocabulary": list(vocab.tokens),
        "standardization": standardization.to_dict(),
        "time_unit": ingestion.time_unit,
        # wall-clock phases; machine-dependent, never compared across runs
        "timings": {
            "load_s": t_load - t_start,
            "evaluate_s": t_eval - t_load,
            "assemble_s": t_done - t_eval,
            "total_s": t_done - t_start,
        },
    }
    return InsightSet(metadata, insights)


# --- feedback + ranking -------------------------------------------------------


@dataclass(frozen=True)
class FeedbackRecord:
    candidate_id: str
    rating: str
    timestamp: str

    def __post_init__(self):
        if self.rating not in RATING_LABELS:
            raise InputError(f"unknown rating {self.rating!r}")

    @property
    def label(self) -> float:
        return RATING_LABELS[self.rating]

    def to_dict(self) -> dict:
        return {"candidate_id": self.candidate_id, "rating": self.rating, "timestamp": self.timestamp}

    @classmethod
    def from_dict(cls, d: dict) -> "FeedbackRecord":
        return cls(d["candidate_id"], d["rating"], d["timestamp"])


def load_feedback(path: str | Path) -> list[FeedbackRecord]:
    """Read a JSON Lines feedback log; missing file means no feedback yet."""
    path = Path(path)
    if not path.exists():
        return []
    records = []
    for line_no, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            records.append(FeedbackRecord.from_dict(json.loads(line)))
        except (json.JSONDecodeError, KeyError) as exc:
            raise InputError(f"{path}:{line_no}: bad feedback record: {exc}") from None
    return records


def latest_feedback(records: list[FeedbackRecord]) -> dict[str, FeedbackRecord]:
    """Latest rating per candidate: re-ratings append, newest timestamp wins
    (file order breaks timestamp ties)."""
    latest: dict[str, FeedbackRecord] = {}
    for rec in records:
        prev = latest.get(rec.candidate_id)
        if prev is None or rec.timestamp >= prev.timestamp:
            latest[rec.candidate_id] = rec
    return latest


@dataclass(frozen=True)
class RankConfig:
    top_k: int = DEFAULT_TOP_K
    knn_k: int = DEFAULT_KNN_K
    seed: int = 0
    train: TrainConfig = field(default_factory=TrainConfig)


@dataclass
class RankResult:
    selected: list[ScoredInsight]
    rescored: list[ScoredInsight]  # all truthful insights, usefulness applied
    model: UsefulnessModel | None
    summary: dict


def run_rank(
    insight_set: InsightSet,
    feedback: list[FeedbackRecord],
    config: RankConfig = RankConfig(),
) -> RankResult:
    """Apply usefulness (model-predicted after feedback, 1 otherwise) and pick
    a diverse top-K, one best insight per K-means cluster."""
    truthful = insight_set.truthful
    if not truthful:
        raise InputError("no truthful insights to rank")
    if config.top_k > len(truthful):
        raise InputError(
            f"top_k={config.top_k} exceeds the {len(truthful)} truthful insights"
        )
    model = None
    summary: dict = {"feedback_total": len(feedback)}
    by_id = {i.candidate_id: i for i in truthful}
    seeds_map = {
        cid: rec for cid, rec in latest_feedback(feedback).items() if cid in by_id
    }
    if seeds_map:
        seeds = [
            (by_id[cid].features, rec.label) for cid, rec in sorted(seeds_map.items())
        ]
        unlabeled = [i for i in truthful if i.candidate_id not in seeds_map]
        pseudo = knn_pseudo_label(seeds, [i.features for i in unlabeled], config.knn_k)
        data = seeds + list(zip((i.features for i in unlabeled), pseudo))
        vocab = insight_set.vocabulary()
        bundle_contexts = sorted(
            {i.context1_id for i in insight_set.insights}
            | {i.context2_id for i in insight_set.insights}
        )
        bundle_measurements = sorted({i.measurement_id for i in insight_set.insights})
        train_cfg = replace(config.train, seed=config.seed)
        model = train_usefulness_model(
            data, bundle_contexts, bundle_measurements, train_cfg, vocab.fingerprint()
        )
        model.standardization = insight_set.metadata.get("standardization", {})
        predictions = model.predict([i.features for i in truthful], vocab.fingerprint())
        rescored = [
            ins.with_usefulness(float(u)) for ins, u in zip(truthful, predictions)
        ]
        summary.update(
            seeds=len(seeds),
            pseudo_labeled=len(pseudo),
            final_mse=model.final_mse,
        )
    else:
        rescored = list(truthful)
        summary.update(seeds=0, pseudo_labeled=0)
    selected, assignment = select_diverse(rescored, config.top_k, seed=config.seed)
    summary["selected"] = [i.candidate_id for i in selected]
    summary["clusters"] = assignment.k
    return RankResult(selected, rescored, model, summary)


def pca_points(
    insight_set: InsightSet, feedback: list[FeedbackRecord] | None = None
) -> dict:
    """2-D PCA of the truthful insights' bosw vectors with optional feedback
    labels joined in, as consumed by the review scatter plot."""
    truthful = insight_set.truthful
    if len(truthful) < 2:
        raise InputError("PCA needs at least 2 truthful insights")
    matrix = np.asarray([i.features.bosw for i in truthful], dtype=float)
    projections, _, explained = pca_project(matrix, dims=2)
    ratings = latest_feedback(feedback or [])
    points = []
    for ins, (x, y) in zip(truthful, projections):
        point = {"candidate_id": ins.candidate_id, "x": float(x), "y": float(y)}
        if ins.candidate_id in ratings:
            point["feedback_label"] = ratings[ins.candidate_id].rating
        points.append(point)
    return {"points": points, "explained_variance": [float(v) for v in explained]}
