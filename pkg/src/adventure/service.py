"""HTTP facade: thin authenticated delegation onto the session engine.

State recovery happens before the app serves: the event log is replayed into
a fresh engine, so a restart lands every learner back in the exact phase they
left. Every mutating endpoint goes through the engine and therefore appends
at least one event.
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional

from fastapi import Depends, FastAPI, Header, HTTPException, Query, Request
from pydantic import BaseModel

from . import analytics, elo
from .accounts import AccountStore, TokenStore
from .assessment import RunnerError
from .config import ServiceConfig, default_kg_path
from .events import EventLog
from .feedback import ChatMemoryStore
from .knowledge_graph import load_graph
from .llm import GenAIUnavailable, HttpLlm, ReferenceLlm, RetryPolicy, ScriptedLlm
from .retrieval import HashEmbedder, HttpEmbedder
from .session import (
    InvalidChoice,
    ModeError,
    Phase,
    SessionEngine,
    SessionError,
    WrongPhase,
)


class LoginRequest(BaseModel):
    username: str
    password: str


class CodeRequest(BaseModel):
    code: str


class PretestRequest(BaseModel):
    codes: list[str]


class AgreementRequest(BaseModel):
    rating: Optional[int] = None
    skip: bool = False


class DecisionRequest(BaseModel):
    choice: str


def _error(status: int, code: str, message: str, phase: Optional[str] = None):
    detail = {"code": code, "message": message}
    if phase is not None:
        detail["phase"] = phase
    return HTTPException(status_code=status, detail=detail)


def build_llm(config: ServiceConfig, kg, runner):
    kind = config.llm.kind
    if kind == "mock_reference":
        return ReferenceLlm(kg, runner)
    if kind == "mock_scripted":
        return ScriptedLlm(outputs=list(config.llm.script))
    return HttpLlm(config.llm.url, timeout_s=config.llm.timeout_s)


def build_embedder(config: ServiceConfig):
    if config.embedder.kind == "http":
        return HttpEmbedder(config.embedder.url, dim=config.embedder.dim)
    return HashEmbedder(dim=config.embedder.dim)


def build_engine(config: ServiceConfig) -> tuple[SessionEngine, AccountStore, EventLog]:
    kg_path = config.kg_path or default_kg_path()
    kg = load_graph(kg_path)
    data_dir = Path(config.data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)
    log = EventLog(path=data_dir / "events.jsonl")
    runner = config.runners
    engine = SessionEngine(
        kg=kg,
        params=config.elo,
        runner=runner,
        llm=build_llm(config, kg, runner),
        memory=ChatMemoryStore(data_dir / "memory"),
        event_log=log,
        embedder=build_embedder(config),
        retrieval_k=config.retrieval_k,
        memory_window=config.memory_window,
        retry_policy=RetryPolicy(retries=config.llm.retries, timeout_s=config.llm.timeout_s),
    )
    accounts = AccountStore(data_dir / "accounts.json")
    for account in accounts.accounts.values():
        engine.ensure_learner(account.learner_id, account.mode)
    engine.recover_from(log.events())
    return engine, accounts, log


def create_app(config: Optional[ServiceConfig] = None) -> FastAPI:
    config = config or ServiceConfig()
    engine, accounts, log = build_engine(config)
    tokens = TokenStore()

    app = FastAPI(title="adventure", version="0.1.0")
    app.state.engine = engine
    app.state.accounts = accounts
    app.state.log = log
    app.state.config = config

    def current_learner(authorization: str = Header(default="")) -> str:
        if not authorization.startswith("Bearer "):
            raise _error(401, "unauthenticated", "missing bearer token")
        learner = tokens.learner_for(authorization[len("Bearer ") :])
        if learner is None:
            raise _error(401, "unauthenticated", "invalid token")
        return learner

    def require_admin(authorization: str = Header(default="")) -> None:
        if authorization != f"Bearer {config.admin_token}":
            status = 401 if not authorization.startswith("Bearer ") else 403
            raise _error(status, "forbidden", "admin token required")

    def run_engine_op(fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except WrongPhase as exc:
            raise _error(409, "wrong_phase", str(exc), phase=exc.actual.value) from exc
        except InvalidChoice as exc:
            raise _error(409, "invalid_choice", str(exc)) from exc
        except ModeError as exc:
            raise _error(409, "mode_error", str(exc)) from exc
        except (KeyError, ValueError) as exc:
            raise _error(422, "validation", str(exc)) from exc
        except GenAIUnavailable as exc:
            raise _error(503, "genai_unavailable", str(exc)) from exc
        except RunnerError as exc:
            raise _error(500, "runner_error", str(exc)) from exc
        except SessionError as exc:
            raise _error(409, "session_error", str(exc)) from exc

    @app.post("/api/login")
    def login(body: LoginRequest):
        account = accounts.authenticate(body.username, body.password)
        if account is None:
            raise _error(401, "unauthenticated", "unknown username or wrong password")
        engine.ensure_learner(account.learner_id, account.mode)
        engine.record_login(account.learner_id)
        return {
            "token": tokens.issue(account.learner_id),
            "mode": account.mode.value,
            "learner_id": account.learner_id,
            "locale": account.locale,
        }

    @app.get("/api/concepts")
    def concepts(language: str = Query(...), learner: str = Depends(current_learner)):
        mastered = engine._mastered_concepts(learner, language)
        return {
            "language": language,
            "concepts": [
                {
                    "id": c.id,
                    "name": c.name,
                    "order_index": c.order_index,
                    "upper_concept": c.upper_concept,
                    "mastered": c.id in mastered,
                }
                for c in engine.kg.concepts_for(language)
            ],
        }

    @app.post("/api/concepts/{concept_id}/start")
    def start_concept(
        concept_id: str, language: str = Query(...), learner: str = Depends(current_learner)
    ):
        result = run_engine_op(engine.start_concept, learner, language, concept_id)
        return {
            "phase": result.phase.value,
            "pretest_items": list(result.pretest_items),
            "current_exercise": result.current_exercise,
            "next_concept_suggestion": result.next_concept_suggestion,
        }

    @app.post("/api/pretest/submit")
    def pretest(body: PretestRequest, learner: str = Depends(current_learner)):
        placement, first = run_engine_op(engine.submit_pretest, learner, body.codes)
        return {
            "level": placement.initial_level.value,
            "theta": placement.initial_theta,
            "first_exercise": first,
        }

    def _exercise_view(exercise_id: str, locale: str) -> dict:
        ex = engine.kg.exercises[exercise_id]
        used = locale if locale in ex.statements else "en"
        return {
            "id": ex.id,
            "language": ex.language_id,
            "level": ex.level.value,
            "statement": ex.statements[used],
            "locale_used": used,
            "locale_fallback": used != locale,
            "hints": [{"concept": h.concept, "points": list(h.points)} for h in ex.hints],
        }

    @app.get("/api/session/current")
    def current(locale: str = Query(default="en"), learner: str = Depends(current_learner)):
        session = run_engine_op(engine._active_session, learner)
        view: dict = {
            "phase": session.phase.value,
            "language": session.language_id,
            "concept": session.concept_id,
            "pretest_items": list(session.pretest_items)
            if session.phase is Phase.NEEDS_PRETEST
            else [],
            "exercise": None,
            "pending": session.pending.as_payload() if session.pending else None,
            "feedback": None,
        }
        if session.phase is Phase.NEEDS_PRETEST:
            view["pretest"] = [_exercise_view(item, locale) for item in session.pretest_items]
        if session.current_exercise:
            view["exercise"] = _exercise_view(session.current_exercise, locale)
        if session.last_feedback is not None and session.phase in (
            Phase.AWAITING_AGREEMENT,
            Phase.AWAITING_RECOMMENDATION_DECISION,
            Phase.AWAITING_REPEAT_DECISION,
        ):
            fb = session.last_feedback
            view["feedback"] = {
                "text": fb.feedback_text,
                "recommended_exercise_id": fb.recommended_exercise_id,
                "reason": fb.recommended_reason,
                "repeated": fb.repeated,
                "source": fb.source,
            }
        if session.phase is Phase.CONCEPT_COMPLETE:
            view["next_concept_suggestion"] = engine.kg.next_concept(
                session.language_id,
                session.concept_id,
                engine._mastered_concepts(learner, session.language_id),
            )
        return view

    @app.post("/api/run")
    def run_code(body: CodeRequest, learner: str = Depends(current_learner)):
        return {"output": run_engine_op(engine.run_code, learner, body.code)}

    @app.post("/api/submission")
    def submission(body: CodeRequest, request: Request, learner: str = Depends(current_learner)):
        outcome = run_engine_op(engine.handle_submission, learner, body.code)
        payload = {
            "phase": outcome.phase.value,
            "classification": outcome.classification,
            "all_passed": outcome.all_passed,
            "failed_cases": outcome.failed_cases,
            "pending": outcome.pending,
            "mastered": outcome.mastered,
            "next_concept_suggestion": outcome.next_concept_suggestion,
            "degraded": outcome.degraded,
        }
        if outcome.feedback is not None:
            payload["feedback"] = {
                "text": outcome.feedback.feedback_text,
                "recommended_exercise_id": outcome.feedback.recommended_exercise_id,
                "reason": outcome.feedback.recommended_reason,
                "repeated": outcome.feedback.repeated,
                "source": outcome.feedback.source,
            }
        if outcome.degraded:
            from fastapi.responses import JSONResponse

            return JSONResponse(status_code=503, content=payload)
        return payload

    @app.post("/api/feedback/agreement")
    def agreement(body: AgreementRequest, learner: str = Depends(current_learner)):
        run_engine_op(engine.record_agreement, learner, body.rating, skipped=body.skip)
        session = engine._active_session(learner)
        return {"phase": session.phase.value}

    @app.post("/api/recommendation/decision")
    def decision(body: DecisionRequest, learner: str = Depends(current_learner)):
        exercise_id = run_engine_op(engine.resolve_recommendation, learner, body.choice)
        session = engine._active_session(learner)
        return {"phase": session.phase.value, "exercise": exercise_id}

    @app.post("/api/skip")
    def skip(learner: str = Depends(current_learner)):
        exercise_id = run_engine_op(engine.request_other_exercise, learner)
        return {"exercise": exercise_id}

    @app.get("/api/progress")
    def progress(learner: str = Depends(current_learner)):
        return run_engine_op(engine.progress, learner)

    @app.get("/api/admin/analytics")
    def admin_analytics(_: None = Depends(require_admin)):
        group_of = {
            account.learner_id: account.mode.value for account in accounts.accounts.values()
        }
        return analytics.report(log.events(), group_of)

    @app.post("/api/admin/kg/reload")
    def admin_reload(_: None = Depends(require_admin)):
        kg_path = config.kg_path or default_kg_path()
        engine.set_kg(load_graph(kg_path))
        return {"reloaded": True, "exercises": len(engine.kg.exercises)}

    if config.static_dir is not None and Path(config.static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=config.static_dir, html=True), name="web")

    return app


def serve(config: ServiceConfig) -> None:
    """Blocking entry point used by the CLI."""
    import uvicorn

    app = create_app(config)
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
