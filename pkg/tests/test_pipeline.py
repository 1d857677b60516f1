import json

import pytest

from insightminer.errors import ConfigError, InputError
from insightminer.pipeline import (
    FeedbackRecord,
    InsightSet,
    RankConfig,
    RunConfig,
    ScoredInsight,
    latest_feedback,
    load_feedback,
    pca_points,
    run_generate,
    run_rank,
)
from insightminer.recommender import TrainConfig
from insightminer.synth import generate_synthetic


def strip_volatile(payload: dict) -> dict:
    """Remove machine-dependent fields before byte comparisons."""
    d = json.loads(json.dumps(payload))
    d["metadata"].pop("timings", None)
    d["metadata"]["config"].pop("workers", None)
    return d


class TestRunConfig:
    def test_worker_validation(self):
        with pytest.raises(InputError):
            RunConfig("b", "d", "i", workers=0)

    def test_alpha_validation(self):
        with pytest.raises(InputError):
            RunConfig("b", "d", "i", alpha=1.5)


class TestRunGenerate:
    def test_counts_and_sorting(self, proto_set):
        meta = proto_set.metadata["counts"]
        # 2 schemas x 2 measurements x (8*7 + 2 + 2) ordered pairs = 240
        assert meta["candidates_total"] == 240
        assert meta["evaluated"] == 240
        assert meta["truthful_count"] == len(proto_set.truthful)
        ids = [i.candidate_id for i in proto_set.insights]
        assert ids == sorted(ids)

    def test_planted_effect_detected(self, tmp_path):
        d = generate_synthetic(tmp_path, rows=2000, seed=0, preset="planted")
        out = run_generate(
            RunConfig(str(d / "bundle"), str(d / "data.csv"), str(d / "ingestion.json"))
        )
        assert len(out.insights) == 2
        by_pair = {(i.context1_id, i.context2_id): i for i in out.insights}
        right = by_pair[("ctx_monday", "ctx_otherdays")]
        wrong = by_pair[("ctx_otherdays", "ctx_monday")]
        assert right.scores.truthful and right.scores.delta > 1.5
        assert wrong.scores.delta < 0
        assert right.scores.score_f > wrong.scores.score_f
        assert "greater than" in right.text
        assert right.text[0].isupper()
        assert "{" not in right.text

    def test_parallel_matches_serial(self, proto_dir, proto_set):
        parallel = run_generate(
            RunConfig(
                str(proto_dir / "bundle"),
                str(proto_dir / "data.csv"),
                str(proto_dir / "ingestion.json"),
                workers=3,
            )
        )
        assert json.dumps(strip_volatile(parallel.to_dict()), sort_keys=True) == json.dumps(
            strip_volatile(proto_set.to_dict()), sort_keys=True
        )

    def test_save_load_round_trip(self, proto_set, tmp_path):
        path = tmp_path / "insights.json"
        proto_set.save(path)
        loaded = InsightSet.load(path)
        assert loaded.to_dict() == proto_set.to_dict()

    def test_load_rejects_bad_version(self, proto_set, tmp_path):
        path = tmp_path / "insights.json"
        payload = proto_set.to_dict()
        payload["schema_version"] = 99
        path.write_text(json.dumps(payload))
        with pytest.raises(InputError, match="schema_version"):
            InsightSet.load(path)

    def test_missing_insight_file(self, tmp_path):
        with pytest.raises(InputError, match="not found"):
            InsightSet.load(tmp_path / "nope.json")


class TestFeedback:
    def test_jsonl_round_trip(self, tmp_path):
        path = tmp_path / "feedback.jsonl"
        recs = [
            FeedbackRecord("a" * 16, "useful", "2024-02-01T10:00:00Z"),
            FeedbackRecord("b" * 16, "not_useful", "2024-02-01T11:00:00Z"),
        ]
        path.write_text("".join(json.dumps(r.to_dict()) + "\n" for r in recs))
        assert load_feedback(path) == recs

    def test_missing_file_is_empty(self, tmp_path):
        assert load_feedback(tmp_path / "none.jsonl") == []

    def test_bad_line_reports_number(self, tmp_path):
        path = tmp_path / "feedback.jsonl"
        path.write_text('{"candidate_id": "x", "rating": "useful", "timestamp": "t"}\nnot json\n')
        with pytest.raises(InputError, match=":2:"):
            load_feedback(path)

    def test_unknown_rating_rejected(self):
        with pytest.raises(InputError, match="rating"):
            FeedbackRecord("a" * 16, "meh", "2024-02-01T10:00:00Z")

    def test_latest_wins(self):
        recs = [
            FeedbackRecord("c1", "useful", "2024-02-01T10:00:00Z"),
            FeedbackRecord("c1", "not_useful", "2024-02-02T10:00:00Z"),
            FeedbackRecord("c2", "neutral", "2024-02-01T10:00:00Z"),
        ]
        latest = latest_feedback(recs)
        assert latest["c1"].rating == "not_useful"
        assert latest["c2"].rating == "neutral"

    def test_file_order_breaks_timestamp_ties(self):
        recs = [
            FeedbackRecord("c1", "useful", "2024-02-01T10:00:00Z"),
            FeedbackRecord("c1", "very_useful", "2024-02-01T10:00:00Z"),
        ]
        assert latest_feedback(recs)["c1"].rating == "very_useful"


class TestRunRank:
    def test_no_feedback_keeps_scores(self, proto_set):
        result = run_rank(proto_set, [], RankConfig(top_k=10))
        assert len(result.selected) == 10
        assert result.model is None
        assert result.summary["seeds"] == 0
        for ins in result.selected:
            assert ins.scores.score_u == 1.0
        scores = [i.scores.score_f for i in result.selected]
        assert scores == sorted(scores, reverse=True)

    def test_selected_are_cluster_argmaxes(self, proto_set):
        result = run_rank(proto_set, [], RankConfig(top_k=7))
        selected_ids = {i.candidate_id for i in result.selected}
        assert len(selected_ids) == 7
        assert result.summary["clusters"] == 7

    def test_feedback_trains_model(self, proto_set):
        target = proto_set.truthful[0]
        fb = [FeedbackRecord(target.candidate_id, "not_useful_at_all", "2024-02-01T00:00:00Z")]
        cfg = RankConfig(top_k=5, knn_k=1, train=TrainConfig(epochs=50, seed=0))
        result = run_rank(proto_set, fb, cfg)
        assert result.model is not None
        assert result.summary["seeds"] == 1
        assert result.summary["pseudo_labeled"] == len(proto_set.truthful) - 1
        rescored = {i.candidate_id: i for i in result.rescored}
        assert rescored[target.candidate_id].scores.score_u < 0.5

    def test_top_k_too_large(self, proto_set):
        with pytest.raises(InputError, match="top_k"):
            run_rank(proto_set, [], RankConfig(top_k=len(proto_set.truthful) + 1))

    def test_no_truthful(self, proto_set):
        empty = InsightSet(proto_set.metadata, [])
        with pytest.raises(InputError, match="truthful"):
            run_rank(empty, [])

    def test_deterministic(self, proto_set):
        fb = [
            FeedbackRecord(proto_set.truthful[0].candidate_id, "useful", "2024-02-01T00:00:00Z")
        ]
        cfg = RankConfig(top_k=5, train=TrainConfig(epochs=20, seed=4), seed=4)
        r1 = run_rank(proto_set, fb, cfg)
        r2 = run_rank(proto_set, fb, cfg)
        assert [i.candidate_id for i in r1.selected] == [i.candidate_id for i in r2.selected]
        assert r1.summary["final_mse"] == r2.summary["final_mse"]


class TestPcaPoints:
    def test_shapes_and_labels(self, proto_set):
        fb = [
            FeedbackRecord(proto_set.truthful[0].candidate_id, "useful", "2024-02-01T00:00:00Z")
        ]
        out = pca_points(proto_set, fb)
        assert len(out["points"]) == len(proto_set.truthful)
        assert len(out["explained_variance"]) == 2
        labeled = [p for p in out["points"] if "feedback_label" in p]
        assert len(labeled) == 1
        assert labeled[0]["feedback_label"] == "useful"

    def test_too_few(self, proto_set):
        small = InsightSet(proto_set.metadata, proto_set.truthful[:1])
        with pytest.raises(InputError):
            pca_points(small)


class TestSynth:
    def test_row_and_preset_validation(self, tmp_path):
        with pytest.raises(ConfigError):
            generate_synthetic(tmp_path, rows=10)
        with pytest.raises(ConfigError):
            generate_synthetic(tmp_path, rows=500, preset="bogus")

    def test_outputs_written(self, proto_dir):
        for name in ("data.csv", "ingestion.json", "ground_truth.json"):
            assert (proto_dir / name).exists()
        for name in ("schemas.json", "measurements.json", "contexts.json"):
            assert (proto_dir / "bundle" / name).exists()

    def test_deterministic_given_seed(self, tmp_path):
        a = generate_synthetic(tmp_path / "a", rows=300, seed=5, preset="planted")
        b = generate_synthetic(tmp_path / "b", rows=300, seed=5, preset="planted")
        assert (a / "data.csv").read_text() == (b / "data.csv").read_text()
