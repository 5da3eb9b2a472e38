"""HTTP facade over the library: policies, interview sessions, evaluation jobs.

Every endpoint is a thin mapping onto a library call; the payload builders
below are plain functions so tests can compare endpoint bytes with direct
calls. Error bodies always carry {code, message, detail?} with stable codes.
Evaluation requests run asynchronously (one job at a time by default) and are
polled by job id. Session writes are serialized per session id.
"""

from __future__ import annotations

import asyncio
import secrets
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from . import evaluation, interview, oracles
from .corpus import Corpus, Policy, load_corpus_dir
from .errors import PcdError, UnknownJobError, UnknownSessionError
from .interview import Session, SessionStatus, SessionStore
from .logic import TriValue, tree_snapshot

_HTTP_STATUS = {
    "unknown_policy": 404,
    "unknown_session": 404,
    "unknown_scenario": 404,
    "unknown_job": 404,
    "duplicate_answer": 409,
    "irrelevant_question": 409,
    "session_resolved": 409,
    "session_closed": 409,
    "transport_error": 502,
    "protocol_error": 502,
}


@dataclass
class ServiceConfig:
    corpus_dir: Path
    session_store: Path | None = None
    static_dir: Path | None = None
    default_oracle: str = "gold"
    confusion_file: Path | None = None
    endpoint: str | None = None
    seed: int = 0
    max_eval_jobs: int = 1
    max_in_flight: int = 64
    strict_corpus: bool = False


def policy_payload(policy: Policy) -> dict:
    return {
        "id": policy.id,
        "text": policy.text,
        "source_url": policy.source_url,
        "questions": [{"id": q.id, "text": q.text} for q in policy.questions],
        "tree": policy.tree_text,
        "question_count": len(policy.questions),
    }


def policies_payload(corpus: Corpus) -> dict:
    return {"policies": [policy_payload(p) for p in corpus.policies.values()]}


def next_payload(session: Session) -> dict:
    if session.status is SessionStatus.RESOLVED:
        return {"resolved": str(session.resolution)}
    if session.status is SessionStatus.ABANDONED:
        return {"abandoned": True}
    question_id = interview.select_next_question(
        session.policy.tree, session.answers(), session.strategy, session.prior
    )
    return {
        "question": {
            "id": question_id,
            "text": session.policy.question_text(question_id),
        }
    }


def session_created_payload(session: Session) -> dict:
    return {"session_id": session.session_id, "next": next_payload(session)}


def session_payload(session: Session) -> dict:
    return {
        "session_id": session.session_id,
        "policy_id": session.policy_id,
        "strategy": session.strategy,
        "status": session.status.value,
        "resolution": str(session.resolution) if session.resolution else None,
        "transcript": [
            {
                "question_id": entry.question_id,
                "answer": str(entry.answer),
                "timestamp": entry.timestamp,
            }
            for entry in session.transcript
        ],
        "next": next_payload(session),
        "missing_information": sorted(interview.missing_information(session)),
        "tree": tree_snapshot(session.policy.tree, session.answers()),
    }


class SessionCreateBody(BaseModel):
    policy_id: str
    strategy: str = "order"


class AnswerBody(BaseModel):
    question_id: str
    answer: str


class EvaluateBody(BaseModel):
    oracle: str | None = None
    mode: str = "all-questions"
    strategy: str = "order"
    seed: int | None = None
    confusion: dict | None = None
    endpoint: str | None = None
    max_workers: int = 1


def create_app(config: ServiceConfig, corpus: Corpus | None = None) -> FastAPI:
    if corpus is None:
        corpus = load_corpus_dir(config.corpus_dir, strict=config.strict_corpus)

    app = FastAPI(title="policy compliance workbench")
    store = SessionStore(config.session_store) if config.session_store else None
    sessions: dict[str, Session] = {}
    if store is not None:
        sessions.update(store.replay(corpus.policies))
    session_locks: dict[str, threading.Lock] = {}
    registry_lock = threading.Lock()
    jobs: dict[str, dict] = {}
    executor = ThreadPoolExecutor(max_workers=max(1, config.max_eval_jobs))
    gate = asyncio.Semaphore(max(1, config.max_in_flight))

    app.state.corpus = corpus
    app.state.sessions = sessions

    def get_session(session_id: str) -> Session:
        session = sessions.get(session_id)
        if session is None:
            raise UnknownSessionError(session_id)
        return session

    def lock_for(session_id: str) -> threading.Lock:
        with registry_lock:
            return session_locks.setdefault(session_id, threading.Lock())

    @app.exception_handler(PcdError)
    async def pcd_error_handler(request: Request, exc: PcdError):
        status = _HTTP_STATUS.get(exc.code, 400)
        return JSONResponse(status_code=status, content=exc.as_dict())

    @app.exception_handler(RequestValidationError)
    async def validation_error_handler(request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=422,
            content={
                "code": "invalid_request",
                "message": "request body failed validation",
                "detail": exc.errors(),
            },
        )

    @app.middleware("http")
    async def in_flight_cap(request: Request, call_next):
        async with gate:
            return await call_next(request)

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.get("/policies")
    def list_policies():
        return policies_payload(corpus)

    @app.get("/policies/{policy_id}")
    def get_policy(policy_id: str):
        return policy_payload(corpus.policy(policy_id))

    @app.post("/sessions")
    def create_session(body: SessionCreateBody):
        policy = corpus.policy(body.policy_id)
        session = interview.start_session(policy, strategy=body.strategy)
        sessions[session.session_id] = session
        if store is not None:
            store.record_created(session)
        return session_created_payload(session)

    @app.get("/sessions/{session_id}")
    def get_session_state(session_id: str):
        session = get_session(session_id)
        with lock_for(session_id):  # consistent snapshot under concurrent answers
            return session_payload(session)

    @app.post("/sessions/{session_id}/answer")
    def answer_session(session_id: str, body: AnswerBody):
        session = get_session(session_id)
        try:
            value = TriValue.parse(body.answer)
        except ValueError as exc:
            raise PcdError(str(exc)) from None
        with lock_for(session_id):
            interview.record_answer(session, body.question_id, value)
            if store is not None:
                store.record_answer(session, session.transcript[-1])
                if session.status is SessionStatus.RESOLVED:
                    store.record_resolution(session)
            return session_payload(session)

    def run_evaluation_job(job_id: str, body: EvaluateBody) -> None:
        jobs[job_id]["status"] = "running"
        try:
            confusion = None
            if body.confusion is not None:
                confusion = oracles.ConfusionSpec.from_dict(body.confusion)
            elif config.confusion_file is not None:
                confusion = oracles.ConfusionSpec.from_file(config.confusion_file)
            provider = oracles.build_oracle(
                body.oracle or config.default_oracle,
                corpus=corpus,
                confusion=confusion,
                seed=body.seed if body.seed is not None else config.seed,
                endpoint=body.endpoint or config.endpoint,
            )
            mode = "all-questions" if body.mode == "all" else body.mode
            started = time.time()
            records = evaluation.run_pcd(
                corpus, provider, mode=mode, strategy=body.strategy,
                max_workers=body.max_workers,
            )
            report = evaluation.build_report(
                corpus,
                records,
                metadata={
                    "oracle": provider.name,
                    "mode": mode,
                    "strategy": body.strategy,
                    "seed": body.seed if body.seed is not None else config.seed,
                    "started_at": started,
                    "finished_at": time.time(),
                    "scenario_count": len(records),
                },
            )
            jobs[job_id]["status"] = "done"
            jobs[job_id]["report"] = report.as_dict()
        except Exception as exc:  # job failures surface through polling
            jobs[job_id]["status"] = "failed"
            jobs[job_id]["error"] = (
                exc.as_dict() if isinstance(exc, PcdError) else {"message": str(exc)}
            )

    @app.post("/evaluate")
    def start_evaluation(body: EvaluateBody):
        job_id = secrets.token_hex(16)
        jobs[job_id] = {"status": "queued"}
        executor.submit(run_evaluation_job, job_id, body)
        return {"job_id": job_id}

    @app.get("/evaluate/{job_id}")
    def poll_evaluation(job_id: str):
        job = jobs.get(job_id)
        if job is None:
            raise UnknownJobError(job_id)
        payload = {"job_id": job_id, "status": job["status"]}
        if "report" in job:
            payload["report"] = job["report"]
        if "error" in job:
            payload["error"] = job["error"]
        return payload

    if config.static_dir is not None and Path(config.static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(config.static_dir), html=True))

    return app
