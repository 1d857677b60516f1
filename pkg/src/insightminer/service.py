"""HTTP facade for the review loop: serve ranked insights, collect feedback,
retrain the usefulness model on demand.

Reads always serve the last committed selection; retrain swaps it atomically
and at most one retrain runs at a time.
"""

from __future__ import annotations

import json
import threading
from datetime import datetime, timezone
from pathlib import Path

from fastapi import FastAPI, HTTPException, Query
from fastapi.middleware.cors import CORSMiddleware
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .errors import InputError
from .pipeline import (
    DEFAULT_TOP_K,
    FeedbackRecord,
    InsightSet,
    RankConfig,
    load_feedback,
    pca_points,
    run_rank,
)
from .recommender import RATING_LABELS


class TestResultOut(BaseModel):
    statistic: float
    p_value: float
    method: str
    exact: bool


class ScoreBreakdownOut(BaseModel):
    p_value: float
    truthful: bool
    score_c: float
    score_s: float
    score_u: float
    score_f: float
    delta: float
    gamma: float
    tau: float


class InsightOut(BaseModel):
    candidate_id: str
    text: str
    score_f: float
    scores: ScoreBreakdownOut
    test: TestResultOut
    cluster: int | None = None
    rating: str | None = None


class FeedbackIn(BaseModel):
    candidate_id: str
    rating: str
    timestamp: str | None = None


class FeedbackAck(BaseModel):
    candidate_id: str
    rating: str
    label: float
    timestamp: str
    duplicate: bool


class RetrainOut(BaseModel):
    seeds: int
    pseudo_labeled: int
    final_mse: float | None = None
    added: list[str]
    removed: list[str]
    selected: list[str]


class HealthOut(BaseModel):
    status: str
    insights: int
    truthful: int
    feedback: int


class PcaPointOut(BaseModel):
    candidate_id: str
    x: float
    y: float
    feedback_label: str | None = None


class PcaOut(BaseModel):
    points: list[PcaPointOut]
    explained_variance: list[float]


class ServiceState:
    """Loaded insight set, append-only feedback log, and the current ranked
    selection; selection swaps are guarded by a lock."""

    def __init__(self, insights_path: str, feedback_path: str, seed: int, top_k: int):
        self.insight_set = InsightSet.load(insights_path)
        self.feedback_path = Path(feedback_path)
        self.seed = seed
        self.top_k = min(top_k, len(self.insight_set.truthful))
        self.feedback: list[FeedbackRecord] = load_feedback(self.feedback_path)
        self._seen = {(r.candidate_id, r.timestamp) for r in self.feedback}
        self._write_lock = threading.Lock()
        self._retrain_lock = threading.Lock()
        self._state_lock = threading.Lock()
        self.model = None
        self.model_archive: list = []
        result = run_rank(self.insight_set, self.feedback, self._rank_config())
        self.selection = result.selected
        self.clusters = {
            ins.candidate_id: rank for rank, ins in enumerate(result.selected)
        }
        self.model = result.model

    def _rank_config(self) -> RankConfig:
        return RankConfig(top_k=self.top_k, seed=self.seed)

    def append_feedback(self, record: FeedbackRecord) -> bool:
        """Append to the JSONL log with flush; duplicate (id, timestamp) pairs
        collapse to one logical entry. Returns True if newly stored."""
        key = (record.candidate_id, record.timestamp)
        with self._write_lock:
            if key in self._seen:
                return False
            with self.feedback_path.open("a") as fh:
                fh.write(json.dumps(record.to_dict(), sort_keys=True) + "\n")
                fh.flush()
            self.feedback.append(record)
            self._seen.add(key)
        return True

    def retrain(self) -> dict:
        if not self._retrain_lock.acquire(blocking=False):
            raise HTTPException(status_code=409, detail="retrain already in progress")
        try:
            with self._write_lock:
                feedback = list(self.feedback)
            if not feedback:
                raise HTTPException(status_code=400, detail="no feedback recorded yet")
            result = run_rank(self.insight_set, feedback, self._rank_config())
            with self._state_lock:
                old_ids = {i.candidate_id for i in self.selection}
                new_ids = {i.candidate_id for i in result.selected}
                if self.model is not None:
                    self.model_archive.append(self.model)
                self.model = result.model
                self.selection = result.selected
            return {
                "seeds": result.summary["seeds"],
                "pseudo_labeled": result.summary["pseudo_labeled"],
                "final_mse": result.summary.get("final_mse"),
                "added": sorted(new_ids - old_ids),
                "removed": sorted(old_ids - new_ids),
                "selected": [i.candidate_id for i in result.selected],
            }
        finally:
            self._retrain_lock.release()


def create_app(
    insights_path: str,
    feedback_path: str,
    seed: int = 0,
    top_k: int = DEFAULT_TOP_K,
    static_dir: str | None = None,
) -> FastAPI:
    state = ServiceState(insights_path, feedback_path, seed, top_k)
    app = FastAPI(title="insightminer review service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.service = state

    def _ratings() -> dict[str, str]:
        from .pipeline import latest_feedback

        return {cid: rec.rating for cid, rec in latest_feedback(state.feedback).items()}

    def _insight_out(ins, rank: int | None, ratings: dict[str, str]) -> InsightOut:
        return InsightOut(
            candidate_id=ins.candidate_id,
            text=ins.text,
            score_f=ins.scores.score_f,
            scores=ScoreBreakdownOut(**ins.scores.to_dict()),
            test=TestResultOut(**ins.test.to_dict()),
            cluster=rank,
            rating=ratings.get(ins.candidate_id),
        )

    @app.get("/api/health", response_model=HealthOut)
    def health() -> HealthOut:
        return HealthOut(
            status="ok",
            insights=len(state.insight_set.insights),
            truthful=len(state.insight_set.truthful),
            feedback=len(state.feedback),
        )

    @app.get("/api/insights", response_model=list[InsightOut])
    def get_insights(top: int | None = Query(default=None, ge=1)) -> list[InsightOut]:
        truthful = len(state.insight_set.truthful)
        if top is not None and top > truthful:
            raise HTTPException(
                status_code=400,
                detail=f"top={top} exceeds the {truthful} truthful insights",
            )
        with state._state_lock:
            selection = list(state.selection)
        if top is not None:
            selection = selection[:top]
        ratings = _ratings()
        return [_insight_out(ins, rank, ratings) for rank, ins in enumerate(selection)]

    @app.get("/api/insights/all", response_model=list[InsightOut])
    def get_all_insights() -> list[InsightOut]:
        ratings = _ratings()
        return [
            _insight_out(ins, None, ratings) for ins in state.insight_set.insights
        ]

    @app.post("/api/feedback", response_model=FeedbackAck)
    def post_feedback(body: FeedbackIn) -> FeedbackAck:
        if body.rating not in RATING_LABELS:
            raise HTTPException(
                status_code=422,
                detail=f"unknown rating {body.rating!r}; expected one of {sorted(RATING_LABELS)}",
            )
        known = any(
            i.candidate_id == body.candidate_id for i in state.insight_set.insights
        )
        if not known:
            raise HTTPException(status_code=404, detail=f"unknown candidate_id {body.candidate_id!r}")
        timestamp = body.timestamp or datetime.now(timezone.utc).isoformat(timespec="seconds")
        record = FeedbackRecord(body.candidate_id, body.rating, timestamp)
        stored = state.append_feedback(record)
        return FeedbackAck(
            candidate_id=record.candidate_id,
            rating=record.rating,
            label=record.label,
            timestamp=record.timestamp,
            duplicate=not stored,
        )

    @app.post("/api/retrain", response_model=RetrainOut)
    def post_retrain() -> RetrainOut:
        return RetrainOut(**state.retrain())

    @app.get("/api/pca", response_model=PcaOut)
    def get_pca() -> PcaOut:
        try:
            return PcaOut(**pca_points(state.insight_set, state.feedback))
        except InputError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None

    if static_dir and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app
