"""HTTP session service: create tests, serve questions, ingest answers.

Sessions live in memory; every answer is appended to a JSONL event log on
disk, which is the sole training input for the trainable strategies.
Retraining builds a fresh strategy instance from the full log and swaps it
in atomically; sessions already running keep the snapshot they started
with.
"""
from __future__ import annotations

import json
import logging
import os
import threading
import time
import uuid
from dataclasses import dataclass, field, fields as dc_fields
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .concept_map import ConceptMap, load_concept_map
from .core import (InteractionEvent, Outcome, Question, SessionState)
from .io import append_event, load_background, load_event_log, load_question_bank
from .strategies import REGISTRY, Strategy, build_strategy

logger = logging.getLogger(__name__)

DEFAULT_SESSION_LENGTH = 5
SESSION_EXPIRY_S = 7200.0


class ServiceConfigError(ValueError):
    pass


@dataclass
class ServiceConfig:
    """File paths and knobs for one service process."""

    bank_path: str
    nodes_path: str
    arcs_path: str
    data_dir: str = "data"
    background_path: Optional[str] = None
    default_strategy: str = "concept_map"
    host: str = "127.0.0.1"
    port: int = 8000
    session_expiry_s: float = SESSION_EXPIRY_S
    seed: int = 0
    frontend_dir: Optional[str] = None

    @classmethod
    def from_json(cls, path: str | Path) -> "ServiceConfig":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(raw, dict):
            raise ServiceConfigError("config root must be a JSON object")
        known = {f.name for f in dc_fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ServiceConfigError(f"unknown config fields: {unknown}")
        try:
            config = cls(**raw)
        except TypeError as exc:
            raise ServiceConfigError(str(exc)) from None
        return config.apply_env(os.environ)

    def apply_env(self, env) -> "ServiceConfig":
        """Environment overrides beat the file: bind, data dir, strategy."""
        bind = env.get("LEARNPATH_BIND")
        if bind:
            host, _, port = bind.rpartition(":")
            if host:
                self.host = host
            if port:
                self.port = int(port)
        if env.get("LEARNPATH_DATA_DIR"):
            self.data_dir = env["LEARNPATH_DATA_DIR"]
        if env.get("LEARNPATH_DEFAULT_STRATEGY"):
            self.default_strategy = env["LEARNPATH_DEFAULT_STRATEGY"]
        if self.default_strategy not in REGISTRY:
            raise ServiceConfigError(
                f"default_strategy {self.default_strategy!r} is not registered")
        return self


class CreateSessionRequest(BaseModel):
    user_id: str
    topic: str
    strategy: Optional[str] = None
    length: Optional[int] = None


class AnswerRequest(BaseModel):
    question_id: str
    choice_index: Optional[int] = None
    dont_know: bool = False
    skip: bool = False
    elapsed_ms: int = 0
    click_count: int = 0
    satisfaction: Optional[int] = None


class RetrainRequest(BaseModel):
    strategy: str


@dataclass
class ApiSession:
    """One live test: session state, its strategy snapshot, and bookkeeping."""

    state: SessionState
    strategy: Strategy
    current_question: Optional[str]
    expires_at: float
    lock: threading.Lock = field(default_factory=threading.Lock)


def public_question(q: Question, position: int, total: int) -> dict:
    """The over-the-wire question shape; never includes the answer key."""
    return {
        "id": q.id,
        "text": q.text,
        "options": list(q.options),
        "difficulty": q.difficulty.value,
        "topic": q.topic,
        "position": position,
        "total": total,
    }


class ServiceState:
    """Everything behind the endpoints, shared across requests."""

    def __init__(self, config: ServiceConfig) -> None:
        self.config = config
        self.bank = {q.id: q for q in load_question_bank(config.bank_path)}
        self.cmap: ConceptMap = load_concept_map(config.nodes_path,
                                                 config.arcs_path)
        self.profiles = (load_background(config.background_path)
                         if config.background_path else [])
        self.data_dir = Path(config.data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.log_path = self.data_dir / "events.jsonl"
        self.events: list[InteractionEvent] = (
            load_event_log(self.log_path) if self.log_path.exists() else [])
        self.sessions: dict[str, ApiSession] = {}
        self.sessions_lock = threading.Lock()
        self.log_lock = threading.Lock()
        self.train_lock = threading.Lock()
        self.versions: dict[str, int] = {name: 1 for name in REGISTRY}
        self.strategies: dict[str, Strategy] = {}

    def topics(self) -> dict[str, list[Question]]:
        out: dict[str, list[Question]] = {}
        for q in self.bank.values():
            out.setdefault(q.topic, []).append(q)
        return out

    def strategy_for(self, name: str) -> Strategy:
        """Current snapshot for the name, built lazily from the log."""
        if name not in self.strategies:
            self.strategies[name] = self._build(name)
        return self.strategies[name]

    def _build(self, name: str) -> Strategy:
        return build_strategy(name, bank=self.bank, cmap=self.cmap,
                              events=list(self.events),
                              profiles=self.profiles,
                              seed=self.config.seed)

    def record_event(self, event: InteractionEvent) -> None:
        with self.log_lock:
            append_event(self.log_path, event)
            self.events.append(event)

    def record_summary(self, session: SessionState,
                       satisfaction: Optional[int]) -> dict:
        answered = session.answered
        score = sum(1 for e in answered if e.outcome is Outcome.CORRECT)
        summary = {
            "session_id": session.session_id,
            "user_id": session.user_id,
            "topic": session.topic,
            "strategy": session.strategy_name,
            "score": score,
            "total": len(session.events),
            "outcomes": [{"question_id": e.question_id,
                          "outcome": e.outcome.value} for e in session.events],
            "satisfaction": satisfaction,
        }
        with self.log_lock:
            with self.log_path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps({"record": "summary", **summary},
                                    sort_keys=True) + "\n")
                fh.flush()
        return summary

    def reap_expired(self) -> None:
        now = time.time()
        with self.sessions_lock:
            stale = [sid for sid, s in self.sessions.items()
                     if s.expires_at < now]
            for sid in stale:
                del self.sessions[sid]


def _error(status: int, code: str, detail: str) -> HTTPException:
    return HTTPException(status_code=status,
                         detail={"error": code, "message": detail})


def create_app(config: ServiceConfig) -> FastAPI:
    """Wire the service endpoints around a fresh state object."""
    state = ServiceState(config)
    app = FastAPI(title="learnpath", version="1.0")
    app.state.service = state

    @app.get("/api/health")
    def health() -> dict:
        return {"status": "ok", "sessions": len(state.sessions)}

    @app.get("/api/strategies")
    def strategies() -> list[dict]:
        return [{"name": info.name, "layer": info.layer,
                 "trainable": info.trainable}
                for info in REGISTRY.values()]

    @app.post("/api/sessions", status_code=201)
    def create_session(body: CreateSessionRequest) -> dict:
        state.reap_expired()
        name = body.strategy or config.default_strategy
        if name not in REGISTRY:
            raise _error(400, "UnknownStrategy",
                         f"strategy {name!r} is not registered")
        topics = state.topics()
        if body.topic not in topics:
            raise _error(400, "UnknownTopic",
                         f"topic {body.topic!r} has no questions")
        length = body.length or DEFAULT_SESSION_LENGTH
        if length < 1:
            raise _error(422, "InvalidLength", "length must be >= 1")
        pool = sorted(topics[body.topic], key=lambda q: q.id)
        if len(pool) < length:
            raise _error(409, "InsufficientQuestions",
                         f"topic {body.topic!r} has {len(pool)} questions, "
                         f"needs {length}")
        strategy = state.strategy_for(name)
        session = SessionState(session_id=uuid.uuid4().hex,
                               user_id=body.user_id, topic=body.topic,
                               strategy_name=name, length_target=length)
        strategy.begin_session(session)
        rec = strategy.next_question(session, pool)
        session.mark_asked(rec.question_id)
        api = ApiSession(state=session, strategy=strategy,
                         current_question=rec.question_id,
                         expires_at=time.time() + config.session_expiry_s)
        with state.sessions_lock:
            state.sessions[session.session_id] = api
        return {"session_id": session.session_id, "strategy": name,
                "length": length,
                "question": public_question(state.bank[rec.question_id],
                                            1, length)}

    @app.post("/api/sessions/{session_id}/answer")
    def answer(session_id: str, body: AnswerRequest) -> dict:
        with state.sessions_lock:
            api = state.sessions.get(session_id)
        if api is None:
            raise _error(404, "UnknownSession",
                         f"no session {session_id!r}")
        with api.lock:
            now = time.time()
            if api.expires_at < now:
                raise _error(410, "SessionExpired", "session expired")
            session = api.state
            if session.finished:
                raise _error(410, "SessionFinished",
                             "session already completed")
            if body.question_id != api.current_question:
                raise _error(409, "QuestionMismatch",
                             f"current question is {api.current_question!r}")
            question = state.bank[body.question_id]
            if body.skip:
                outcome = Outcome.SKIPPED
                correct: Optional[bool] = None
            elif body.dont_know:
                outcome = Outcome.DONT_KNOW
                correct = False
            else:
                if body.choice_index is None:
                    raise _error(422, "MissingChoice",
                                 "choice_index required unless dont_know "
                                 "or skip is set")
                if not 0 <= body.choice_index < len(question.options):
                    raise _error(422, "MissingChoice",
                                 "choice_index out of range")
                correct = body.choice_index == question.correct_index
                outcome = Outcome.CORRECT if correct else Outcome.WRONG
            if body.elapsed_ms < 0 or body.click_count < 0:
                raise _error(422, "MissingChoice",
                             "elapsed_ms and click_count must be >= 0")
            timestamp = max(int(now * 1000),
                            session.events[-1].timestamp + 1
                            if session.events else 0)
            event = InteractionEvent(user_id=session.user_id,
                                     session_id=session.session_id,
                                     question_id=question.id,
                                     outcome=outcome,
                                     elapsed_ms=body.elapsed_ms,
                                     click_count=body.click_count,
                                     timestamp=timestamp)
            session.add_event(event)
            state.record_event(event)
            api.strategy.observe_event(session, event)
            api.expires_at = now + config.session_expiry_s

            if session.finished:
                api.strategy.end_session(session)
                summary = state.record_summary(session, body.satisfaction)
                api.current_question = None
                return {"correct": correct, "summary": summary}

            pool = [q for q in sorted(state.topics()[session.topic],
                                      key=lambda q: q.id)
                    if q.id not in session.asked]
            rec = api.strategy.next_question(session, pool)
            session.mark_asked(rec.question_id)
            api.current_question = rec.question_id
            return {"correct": correct,
                    "next_question": public_question(
                        state.bank[rec.question_id],
                        len(session.asked), session.length_target)}

    @app.post("/api/admin/retrain")
    def retrain(body: RetrainRequest) -> dict:
        if body.strategy not in REGISTRY:
            raise _error(400, "NotTrainable",
                         f"strategy {body.strategy!r} is not registered")
        if not REGISTRY[body.strategy].trainable:
            raise _error(400, "NotTrainable",
                         f"strategy {body.strategy!r} has no trained model")
        if not state.train_lock.acquire(blocking=False):
            raise _error(503, "TrainingInProgress",
                         "another retrain is still running")
        try:
            fresh = state._build(body.strategy)
            state.strategies[body.strategy] = fresh
            state.versions[body.strategy] += 1
            return {"strategy": body.strategy,
                    "model_version": state.versions[body.strategy]}
        finally:
            state.train_lock.release()

    frontend = config.frontend_dir
    if frontend and Path(frontend).is_dir():
        app.mount("/", StaticFiles(directory=frontend, html=True),
                  name="frontend")
    return app


def run(config: ServiceConfig) -> None:
    """Blocking entry point used by the CLI."""
    import uvicorn

    uvicorn.run(create_app(config), host=config.host, port=config.port,
                log_level="info")
