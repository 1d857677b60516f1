import json

import pytest

from insightminer.cli import main


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert main(["synth", "--out", str(root / "data"), "--rows", "800",
                 "--seed", "3", "--preset", "planted"]) == 0
    return root


def test_generate_and_rank_flow(workspace, capsys):
    d = workspace / "data"
    insights = workspace / "insights.json"
    code = main([
        "generate",
        "--schemas", str(d / "bundle"),
        "--data", str(d / "data.csv"),
        "--config", str(d / "ingestion.json"),
        "--out", str(insights),
        "--workers", "2",
    ])
    assert code == 0
    out = capsys.readouterr().out
    assert "candidates=2" in out
    payload = json.loads(insights.read_text())
    assert payload["schema_version"] == 1

    ranked = workspace / "ranked.json"
    assert main(["rank", "--insights", str(insights), "--top", "1",
                 "--out", str(ranked)]) == 0
    selection = json.loads(ranked.read_text())
    assert len(selection["selected"]) == 1


def test_rank_with_feedback_writes_model(workspace):
    insights = workspace / "insights.json"
    payload = json.loads(insights.read_text())
    cid = payload["insights"][0]["candidate_id"]
    fb = workspace / "feedback.jsonl"
    fb.write_text(json.dumps(
        {"candidate_id": cid, "rating": "useful", "timestamp": "2024-02-01T00:00:00Z"}
    ) + "\n")
    ranked = workspace / "ranked_fb.json"
    model = workspace / "model.json"
    code = main(["rank", "--insights", str(insights), "--feedback", str(fb),
                 "--top", "1", "--epochs", "10", "--out", str(ranked),
                 "--model", str(model)])
    assert code == 0
    assert json.loads(model.read_text())["schema_version"] == 1


def test_missing_insights_is_input_error(workspace, capsys):
    code = main(["rank", "--insights", str(workspace / "nope.json"),
                 "--out", str(workspace / "x.json")])
    assert code == 1
    assert "error:" in capsys.readouterr().err


def test_bad_bundle_is_input_error(workspace, tmp_path, capsys):
    empty = tmp_path / "empty"
    empty.mkdir()
    code = main([
        "generate", "--schemas", str(empty),
        "--data", str(workspace / "data" / "data.csv"),
        "--config", str(workspace / "data" / "ingestion.json"),
        "--out", str(tmp_path / "out.json"),
    ])
    assert code == 1


def test_pca_command(workspace):
    out = workspace / "pca.json"
    code = main(["pca", "--insights", str(workspace / "insights.json"),
                 "--out", str(out)])
    # planted preset has only 1 truthful insight -> InputError path
    if code == 0:
        payload = json.loads(out.read_text())
        assert "points" in payload
    else:
        assert code == 1


def test_synth_row_validation(tmp_path, capsys):
    code = main(["synth", "--out", str(tmp_path / "d"), "--rows", "5"])
    assert code == 1
