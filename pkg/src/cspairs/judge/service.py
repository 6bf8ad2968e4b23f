"""Wire API for the forced-choice judgment service.

Endpoints: create-plan, open-session, next-item, submit, progress, export.
Everything except submit is idempotent.  Payloads never reveal which side is
the observed sentence.
"""

from dataclasses import dataclass
from typing import Literal, Optional

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from ..errors import DataError
from ..pairgen import MinimalPair, differing_char_spans
from ..records import read_records
from .store import (DuplicateJudgment, JudgmentLog, Plan, export_judgments,
                    new_judgment, plan_assignments)


@dataclass(frozen=True)
class PairView:
    """Presentation-ready pair: both rendered texts plus the character spans
    of the differing material."""

    pair_id: str
    observed_text: str
    manipulated_text: str
    observed_span: tuple
    manipulated_span: tuple


def pair_view(pair: MinimalPair) -> PairView:
    obs_span, man_span = differing_char_spans(pair)
    return PairView(pair.pair_id, pair.observed.text, pair.manipulated.text,
                    obs_span, man_span)


def load_pair_views(path) -> dict:
    _, rows = read_records(path)
    views = {}
    for row in rows:
        view = pair_view(MinimalPair.from_record(row))
        views[view.pair_id] = view
    return views


class PlanRequest(BaseModel):
    pool: list[str]
    k: int = 1
    seed: int = 0
    batch_size: int = 67


class PlanAnnotator(BaseModel):
    annotator_id: str
    token: str
    n_pairs: int
    n_batches: int


class PlanResponse(BaseModel):
    n_pairs: int
    k: int
    seed: int
    batch_size: int
    annotators: list[PlanAnnotator]


class OpenSessionRequest(BaseModel):
    token: str


class Progress(BaseModel):
    judged: int
    total: int
    batch_index: int
    batch_count: int
    batch_size: int


class SessionResponse(BaseModel):
    annotator_id: str
    progress: Progress


class NextItemResponse(BaseModel):
    status: Literal["item", "complete"]
    pair_id: Optional[str] = None
    sentence_a: Optional[str] = None
    sentence_b: Optional[str] = None
    span_a: Optional[tuple[int, int]] = None
    span_b: Optional[tuple[int, int]] = None
    progress: Progress


class SubmitRequest(BaseModel):
    pair_id: str
    choice: Literal["A", "B"]


class SubmitResponse(BaseModel):
    recorded: bool
    progress: Progress


class ExportResponse(BaseModel):
    records: list[dict]


def _plan_response(plan: Plan) -> PlanResponse:
    return PlanResponse(
        n_pairs=len(plan.assignments),
        k=plan.k,
        seed=plan.seed,
        batch_size=plan.batch_size,
        annotators=[PlanAnnotator(annotator_id=a, token=plan.tokens[a],
                                  n_pairs=len(plan.annotator_pairs(a)),
                                  n_batches=len(plan.batches[a]))
                    for a in plan.annotators],
    )


def create_app(pair_views: dict, plan: Plan | None = None,
               log: JudgmentLog | None = None, plan_path=None,
               allow_cors: bool = True) -> FastAPI:
    app = FastAPI(title="judgment service")
    if allow_cors:
        app.add_middleware(CORSMiddleware, allow_origins=["*"],
                           allow_methods=["*"], allow_headers=["*"])
    state = app.state
    state.views = pair_views
    state.plan = plan
    state.log = log
    state.plan_path = plan_path

    def require_plan() -> Plan:
        if state.plan is None:
            raise HTTPException(status_code=409, detail="no plan created yet")
        return state.plan

    def require_log() -> JudgmentLog:
        if state.log is None:
            raise HTTPException(status_code=500, detail="no judgment log configured")
        return state.log

    def annotator_from_token(token: str) -> str:
        plan = require_plan()
        annotator = plan.annotator_for_token(token)
        if annotator is None:
            raise HTTPException(status_code=403, detail="unknown session token")
        return annotator

    def progress_for(annotator: str) -> Progress:
        plan = require_plan()
        log = require_log()
        assigned = plan.annotator_pairs(annotator)
        judged = log.judged_pairs(annotator) & set(assigned)
        batches = plan.batches[annotator]
        batch_index = len(batches) - 1 if batches else 0
        for idx, batch in enumerate(batches):
            if any(pid not in judged for pid in batch):
                batch_index = idx
                break
        return Progress(judged=len(judged), total=len(assigned),
                        batch_index=batch_index, batch_count=len(batches),
                        batch_size=plan.batch_size)

    @app.post("/plan", response_model=PlanResponse)
    def create_plan(req: PlanRequest) -> PlanResponse:
        if state.plan is not None:
            existing = state.plan
            same = (existing.seed == req.seed and existing.k == req.k
                    and existing.batch_size == req.batch_size
                    and list(existing.annotators) == list(req.pool))
            if same:
                return _plan_response(existing)
            raise HTTPException(status_code=409, detail="a different plan already exists")
        try:
            plan = plan_assignments(sorted(state.views), req.pool, req.k, req.seed,
                                    req.batch_size)
        except DataError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        state.plan = plan
        if state.plan_path is not None:
            plan.save(state.plan_path)
        return _plan_response(plan)

    @app.post("/session/open", response_model=SessionResponse)
    def open_session(req: OpenSessionRequest) -> SessionResponse:
        annotator = annotator_from_token(req.token)
        return SessionResponse(annotator_id=annotator, progress=progress_for(annotator))

    @app.get("/session/{token}/next", response_model=NextItemResponse)
    def next_item(token: str) -> NextItemResponse:
        plan = require_plan()
        log = require_log()
        annotator = annotator_from_token(token)
        judged = log.judged_pairs(annotator)
        for batch in plan.batches[annotator]:
            for pair_id in batch:
                if pair_id in judged:
                    continue
                view = state.views.get(pair_id)
                if view is None:
                    raise HTTPException(status_code=500, detail=f"pair {pair_id} not loaded")
                position = plan.observed_position(pair_id, annotator)
                if position == "A":
                    a_text, a_span = view.observed_text, view.observed_span
                    b_text, b_span = view.manipulated_text, view.manipulated_span
                else:
                    a_text, a_span = view.manipulated_text, view.manipulated_span
                    b_text, b_span = view.observed_text, view.observed_span
                return NextItemResponse(status="item", pair_id=pair_id,
                                        sentence_a=a_text, sentence_b=b_text,
                                        span_a=a_span, span_b=b_span,
                                        progress=progress_for(annotator))
        return NextItemResponse(status="complete", progress=progress_for(annotator))

    @app.post("/session/{token}/submit", response_model=SubmitResponse)
    def submit(token: str, req: SubmitRequest) -> SubmitResponse:
        plan = require_plan()
        log = require_log()
        annotator = annotator_from_token(token)
        assigned = plan.annotator_pairs(annotator)
        if req.pair_id not in assigned:
            raise HTTPException(status_code=404,
                                detail=f"pair {req.pair_id} not assigned to this session")
        record = new_judgment(annotator, req.pair_id, req.choice,
                              plan.observed_position(req.pair_id, annotator),
                              plan.batch_index_of(annotator, req.pair_id))
        try:
            log.append(record)
        except DuplicateJudgment as exc:
            raise HTTPException(status_code=409,
                                detail={"error": "already judged",
                                        "original": exc.original.to_record()}) from exc
        return SubmitResponse(recorded=True, progress=progress_for(annotator))

    @app.get("/session/{token}/progress", response_model=Progress)
    def progress(token: str) -> Progress:
        return progress_for(annotator_from_token(token))

    @app.get("/export", response_model=ExportResponse)
    def export(annotator: Optional[str] = None,
               complete_batches_only: bool = False) -> ExportResponse:
        log = require_log()
        plan = state.plan if (complete_batches_only or state.plan) else None
        return ExportResponse(records=export_judgments(
            log, plan=plan, annotator=annotator,
            complete_batches_only=complete_batches_only))

    return app
