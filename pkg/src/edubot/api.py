"""REST service: authentication, rate limiting, routes and the envelope.

Every response body is ``{"status", "message", "data"?}``. Errors map
to exactly four codes: 400 for bad input, unknown ids and conflicts,
403 for failed authentication, 429 for rate limiting, 500 when the
engine faults or stops answering.

Request flow: CORS -> auth -> rate limit -> route -> engine handle.
Auth and rate limiting run before any body parsing or engine work, so
a rejected request never reaches an engine.
"""

from __future__ import annotations

import random
import threading
import time
from collections import defaultdict, deque
from contextlib import asynccontextmanager
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Optional

from fastapi import Body, FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from starlette.datastructures import Headers

from . import engine as eng
from .core import (
    ApiKey,
    AuditEvent,
    BotInstance,
    BotMode,
    BotState,
    Conflict,
    EduBotError,
    EngineFault,
    Group,
    InvalidInput,
    NotFound,
    Outcome,
    Unavailable,
    utcnow,
)
from .engine import Engine, EngineContext, EngineHandle
from .gateway import ChatGateway, SimulatedChatPlatform
from .persistence import (
    AuditLog,
    RegistryStore,
    SecretsStore,
    export_attendance_csv,
    export_survey_csv,
    new_api_key,
    verify_api_secret,
)

RATE_LIMIT_MAX = 30
RATE_LIMIT_WINDOW_S = 10.0


@dataclass
class ServiceConfig:
    data_dir: Path
    secrets_path: Path
    passphrase: str
    console_origin: str = "http://localhost:5173"
    seed: int = 0
    rate_limit_max: int = RATE_LIMIT_MAX
    rate_limit_window_s: float = RATE_LIMIT_WINDOW_S
    clock: Optional[Callable[[], datetime]] = None
    # None turns background sweeping off; scripted replays rely on that.
    idle_sweep_s: Optional[float] = 0.2


def ok(message: str, data: Optional[dict] = None) -> dict:
    body = {"status": "success", "message": message}
    if data is not None:
        body["data"] = data
    return body


def err(message: str) -> dict:
    return {"status": "error", "message": message}


def status_for(exc: BaseException) -> int:
    if isinstance(exc, (InvalidInput, NotFound, Conflict, ValueError)):
        return 400
    return 500


class RateLimiter:
    """Sliding window per key; rejected requests do not consume quota."""

    def __init__(self, max_requests: int, window_s: float,
                 timer: Callable[[], float] = time.monotonic):
        self._max = max_requests
        self._window_s = window_s
        self._timer = timer
        self._hits: dict = defaultdict(deque)
        self._lock = threading.Lock()

    def allow(self, key: str) -> bool:
        now = self._timer()
        with self._lock:
            hits = self._hits[key]
            while hits and now - hits[0] >= self._window_s:
                hits.popleft()
            if len(hits) >= self._max:
                return False
            hits.append(now)
            return True


class Service:
    """Owns the gateway, the stores and one engine handle per bot."""

    def __init__(self, config: ServiceConfig, gateway: Optional[ChatGateway] = None):
        self.config = config
        self.gateway = gateway if gateway is not None else SimulatedChatPlatform(
            seed=config.seed
        )
        if config.clock is not None:
            self.clock = config.clock
        elif isinstance(self.gateway, SimulatedChatPlatform):
            self.clock = self.gateway.clock.now
        else:
            self.clock = utcnow
        data_dir = Path(config.data_dir)
        self.audit = AuditLog(data_dir / "logs")
        self.secrets = SecretsStore(Path(config.secrets_path), config.passphrase)
        self.registry = RegistryStore(data_dir / "registry.json")
        self.attendance_dir = data_dir / "data" / "attendance"
        self.surveys_dir = data_dir / "data" / "surveys"
        self.rate_limiter = RateLimiter(config.rate_limit_max,
                                        config.rate_limit_window_s)
        self.fault_commands: set = set()
        self.bots: dict = {}       # bot_id -> BotInstance
        self.handles: dict = {}    # bot_id -> EngineHandle (running bots only)
        self._snapshots: dict = {} # bot_id -> last engine snapshot
        self._api_keys: dict = {}  # key_id -> ApiKey
        self._bot_seq = 0
        self._lock = threading.RLock()
        self.started_at = utcnow()
        self._load()

    # -- startup / shutdown ---------------------------------------------------

    def _load(self) -> None:
        for key, value in self.secrets.load().items():
            if key.startswith("apikey:"):
                self._api_keys[value["key_id"]] = ApiKey.from_record(value)
        state = self.registry.load()
        if state is None:
            return
        for bot_id, snap in state.get("bots", {}).items():
            bot = BotInstance.from_record(snap["bot"])
            bot.state = BotState.STOPPED  # engines never survive a restart
            snap = dict(snap)
            snap["bot"] = bot.to_record()
            self.bots[bot_id] = bot
            self._snapshots[bot_id] = snap
            seq = _bot_seq_of(bot_id)
            if seq is not None:
                self._bot_seq = max(self._bot_seq, seq)

    def shutdown(self) -> None:
        with self._lock:
            for bot_id in list(self.handles):
                self._stop_engine(bot_id)
                self.bots[bot_id].transition(BotState.STOPPED)
                self._refresh_bot_record(bot_id)
            self.persist()

    # -- api keys -------------------------------------------------------------

    def add_api_key(self, label: str) -> tuple:
        record, full = new_api_key(label)
        with self._lock:
            self._api_keys[record.key_id] = record
            self.secrets.update(**{f"apikey:{record.key_id}": record.to_record()})
        return record, full

    def authenticate(self, authorization: str) -> Optional[ApiKey]:
        if not authorization.startswith("Bearer "):
            return None
        token = authorization[len("Bearer "):].strip()
        key_id, _, secret = token.partition(".")
        if not key_id or not secret:
            return None
        record = self._api_keys.get(key_id)
        if record is None or not record.enabled:
            return None
        if not verify_api_secret(record.secret_hash, secret):
            return None
        return record

    # -- bot lifecycle ----------------------------------------------------------

    def create_bot(self, payload: dict, actor: str) -> BotInstance:
        name = _need_str(payload, "name")
        guild_id = _need_str(payload, "guild_id")
        token = _need_str(payload, "token")
        mode = BotMode(payload.get("mode", BotMode.DEVELOPMENT.value))
        groups = [
            Group(id=_need_str(g, "id"), channel_id=_need_str(g, "channel_id"),
                  roster=frozenset(g.get("roster", [])))
            for g in payload.get("groups", [])
        ]
        seen = set()
        for g in groups:
            if g.id in seen:
                raise InvalidInput(f"duplicate group id {g.id!r}")
            seen.add(g.id)
        with self._lock:
            self._bot_seq += 1
            bot_id = f"b{self._bot_seq}"
            bot = BotInstance(id=bot_id, name=name,
                              token_ref=BotInstance.token_ref_for(bot_id),
                              guild_id=guild_id, mode=mode,
                              created_at=self.clock())
            self.bots[bot_id] = bot
            self._snapshots[bot_id] = {
                "bot": bot.to_record(),
                "groups": [g.to_record() for g in groups],
                "sessions": [], "surveys": [], "responses": {}, "feedback": [],
                "counters": {"att": 0, "srv": 0, "fbk": 0},
            }
            self.secrets.update(**{bot.token_ref: token})
            self.persist()
        self.audit_api(actor, "bot_create", {"bot_id": bot_id, "name": name},
                       Outcome.SUCCESS)
        return bot

    def start_bot(self, bot_id: str, actor: str) -> BotInstance:
        with self._lock:
            bot = self._bot(bot_id)
            if bot.mode is BotMode.PRODUCTION and isinstance(
                    self.gateway, SimulatedChatPlatform):
                raise InvalidInput(
                    "production mode needs a real chat platform; this "
                    "deployment only has the simulated one")
            bot.transition(BotState.STARTING)
            token = self.secrets.load().get(bot.token_ref)
            if token is None:
                bot.transition(BotState.ERROR)
                self._refresh_bot_record(bot_id)
                raise NotFound(f"no token stored for bot {bot_id}")
            snap = self._snapshots[bot_id]
            groups = [Group.from_record(g) for g in snap["groups"]]
            if (isinstance(self.gateway, SimulatedChatPlatform)
                    and not self.gateway.has_token(token)):
                # development convenience: materialize the guild this token
                # grants access to, then bind the token to it
                try:
                    try:
                        self.gateway.register_token(token, bot.guild_id)
                    except NotFound:
                        self._provision_guild(bot.guild_id, groups)
                        self.gateway.register_token(token, bot.guild_id)
                except EduBotError:
                    bot.transition(BotState.ERROR)
                    self._refresh_bot_record(bot_id)
                    raise
            ctx = EngineContext(
                bot=bot,
                gateway=self.gateway,
                clock=self.clock,
                rng=random.Random(f"{self.config.seed}:{bot_id}"),
                audit=self.audit.append,
                on_attendance_closed=lambda s: export_attendance_csv(
                    s, self.attendance_dir),
                on_survey_closed=lambda s, rs: export_survey_csv(
                    s, rs, self.surveys_dir),
                fault_commands=self.fault_commands,
            )
            engine = Engine(ctx, groups=groups)
            engine.restore(snap)
            try:
                self.gateway.connect(bot_id, token)
            except EduBotError:
                bot.transition(BotState.ERROR)
                self._refresh_bot_record(bot_id)
                raise
            handle = EngineHandle(engine, idle_sweep_s=self.config.idle_sweep_s)
            self.gateway.subscribe(bot_id, handle.on_event)
            self.handles[bot_id] = handle
            bot.transition(BotState.RUNNING)
            self.persist()
        self.audit_api(actor, "bot_start", {"bot_id": bot_id}, Outcome.SUCCESS)
        return bot

    def stop_bot(self, bot_id: str, actor: str) -> BotInstance:
        with self._lock:
            bot = self._bot(bot_id)
            if bot_id not in self.handles:
                raise Conflict(f"bot {bot_id} is not running")
            self._stop_engine(bot_id)
            bot.transition(BotState.STOPPED)
            self._refresh_bot_record(bot_id)
            self.persist()
        self.audit_api(actor, "bot_stop", {"bot_id": bot_id}, Outcome.SUCCESS)
        return bot

    def delete_bot(self, bot_id: str, actor: str) -> None:
        with self._lock:
            bot = self._bot(bot_id)
            if bot_id in self.handles:
                raise Conflict(f"stop bot {bot_id} before deleting it")
            del self.bots[bot_id]
            self._snapshots.pop(bot_id, None)
            self.secrets.update(**{bot.token_ref: None})
            self.persist()
        self.audit_api(actor, "bot_delete", {"bot_id": bot_id}, Outcome.SUCCESS)

    def _provision_guild(self, guild_id: str, groups: list) -> None:
        self.gateway.create_guild(guild_id)
        channels = set()
        members = set()
        for group in groups:
            if group.channel_id not in channels:
                self.gateway.create_channel(guild_id, group.channel_id)
                channels.add(group.channel_id)
            for member_id in sorted(group.roster):
                if member_id not in members:
                    self.gateway.add_member(guild_id, member_id)
                    members.add(member_id)

    def _stop_engine(self, bot_id: str) -> None:
        handle = self.handles.pop(bot_id)
        try:
            snap = handle.submit(eng.Snapshot(), timeout=5.0)
            self._snapshots[bot_id] = snap.data
        finally:
            handle.stop()
            self.gateway.disconnect(bot_id)

    def _refresh_bot_record(self, bot_id: str) -> None:
        snap = self._snapshots.get(bot_id)
        if snap is not None:
            snap["bot"] = self.bots[bot_id].to_record()

    # -- lookups ------------------------------------------------------------

    def _bot(self, bot_id: str) -> BotInstance:
        bot = self.bots.get(bot_id)
        if bot is None:
            raise NotFound(f"unknown bot {bot_id!r}")
        return bot

    def require_running(self, bot_id: Optional[str]) -> EngineHandle:
        with self._lock:
            if bot_id is not None:
                self._bot(bot_id)
                handle = self.handles.get(bot_id)
                if handle is None:
                    raise Conflict(f"bot {bot_id} is not running")
                return handle
            if not self.bots:
                raise NotFound("no bots are configured")
            if len(self.handles) == 1:
                return next(iter(self.handles.values()))
            if not self.handles:
                raise Conflict("no bot is running")
            raise InvalidInput("several bots are running; pass bot=<id>")

    def handle_for_entity(self, entity_id: str) -> EngineHandle:
        """Resolve ids like ``b1-att-3`` to the owning bot's handle."""
        with self._lock:
            for bot_id in self.bots:
                if entity_id.startswith(bot_id + "-"):
                    handle = self.handles.get(bot_id)
                    if handle is None:
                        raise Conflict(f"bot {bot_id} is not running")
                    return handle
        raise NotFound(f"unknown id {entity_id!r}")

    # -- persistence ------------------------------------------------------------

    def persist(self) -> None:
        with self._lock:
            for bot_id, handle in self.handles.items():
                snap = handle.submit(eng.Snapshot(), timeout=5.0)
                self._snapshots[bot_id] = snap.data
            self.registry.save({"bots": dict(sorted(self._snapshots.items()))})

    # -- audit ---------------------------------------------------------------

    def audit_api(self, actor: str, action: str, params: dict,
                  outcome: Outcome, detail: str = "") -> None:
        self.audit.append(AuditEvent(ts=self.clock(), actor=actor, action=action,
                                     params=params, outcome=outcome,
                                     detail=detail))

    def run(self, request: Request, handle: EngineHandle, cmd, action: str,
            params: dict, audited: bool = True) -> eng.CommandResult:
        actor = getattr(request.state, "key_id", "anonymous")
        try:
            result = handle.submit(cmd)
        except BaseException as exc:
            if audited:
                self.audit_api(actor, action, params, Outcome.ERROR, str(exc))
            raise
        if audited:
            self.audit_api(actor, action, params, Outcome.SUCCESS)
        return result


def _bot_seq_of(bot_id: str) -> Optional[int]:
    if bot_id.startswith("b") and bot_id[1:].isdigit():
        return int(bot_id[1:])
    return None


def _need_str(payload: dict, key: str) -> str:
    value = payload.get(key)
    if not isinstance(value, str) or not value:
        raise InvalidInput(f"{key!r} must be a non-empty string")
    return value


def _opt_positive_int(payload: dict, key: str) -> Optional[int]:
    value = payload.get(key)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, int) or value <= 0:
        raise InvalidInput(f"{key!r} must be a positive integer")
    return value


# ---------------------------------------------------------------------------
# Middleware
# ---------------------------------------------------------------------------

class AuthRateLimitMiddleware:
    """Bearer-key auth, then the per-key rate limit, before anything else.

    Rejections are audited and answered straight from here; no route or
    engine code runs for them.
    """

    PUBLIC = {("GET", "/api/health")}

    def __init__(self, app, service: Service):
        self.app = app
        self.service = service

    async def __call__(self, scope, receive, send):
        if scope["type"] != "http":
            await self.app(scope, receive, send)
            return
        method, path = scope["method"], scope["path"]
        if (method == "OPTIONS" or (method, path) in self.PUBLIC
                or not path.startswith("/api")):
            await self.app(scope, receive, send)
            return
        headers = Headers(scope=scope)
        authorization = headers.get("authorization", "")
        key = self.service.authenticate(authorization)
        if key is None:
            attempted = authorization[len("Bearer "):].partition(".")[0] \
                if authorization.startswith("Bearer ") else ""
            self.service.audit_api(attempted or "anonymous", "auth_failed",
                                   {"path": path}, Outcome.ERROR,
                                   "missing or invalid API key")
            response = JSONResponse(status_code=403,
                                    content=err("a valid API key is required"))
            await response(scope, receive, send)
            return
        if not self.service.rate_limiter.allow(key.key_id):
            self.service.audit_api(key.key_id, "rate_limited", {"path": path},
                                   Outcome.ERROR, "request budget exhausted")
            response = JSONResponse(status_code=429,
                                    content=err("rate limit exceeded; retry later"))
            await response(scope, receive, send)
            return
        scope.setdefault("state", {})["key_id"] = key.key_id
        await self.app(scope, receive, send)


# ---------------------------------------------------------------------------
# App factory
# ---------------------------------------------------------------------------

def create_app(service: Service) -> FastAPI:
    @asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        service.shutdown()

    app = FastAPI(title="classroom bot service", lifespan=lifespan,
                  docs_url=None, redoc_url=None, openapi_url=None)
    app.state.service = service

    @app.exception_handler(EduBotError)
    async def domain_error(request: Request, exc: EduBotError):
        return JSONResponse(status_code=status_for(exc), content=err(str(exc)))

    @app.exception_handler(RequestValidationError)
    async def body_error(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400,
                            content=err("malformed request body"))

    @app.exception_handler(ValueError)
    async def value_error(request: Request, exc: ValueError):
        return JSONResponse(status_code=400, content=err(str(exc)))

    @app.exception_handler(Exception)
    async def server_error(request: Request, exc: Exception):
        return JSONResponse(status_code=500,
                            content=err("internal error; see audit log"))

    svc = service

    # -- health ---------------------------------------------------------------

    @app.get("/api/health")
    def health():
        bots = [{"id": b.id, "name": b.name, "state": b.state.value,
                 "mode": b.mode.value} for b in svc.bots.values()]
        uptime = (utcnow() - svc.started_at).total_seconds()
        return ok("ok", {"uptime_s": round(uptime, 3), "bots": bots,
                         "time": svc.clock().isoformat()})

    # -- attendance -------------------------------------------------------------

    @app.post("/api/attendance")
    def attendance(request: Request, code: Optional[str] = None,
                   group: Optional[str] = None, status: Optional[str] = None,
                   bot: Optional[str] = None):
        if not group:
            raise InvalidInput("the group query parameter is required")
        if not status:
            raise InvalidInput("the status query parameter is required")
        handle = svc.require_running(bot)
        result = svc.run(request, handle,
                         eng.Attendance(group_id=group, status=status, code=code),
                         "attendance",
                         {"group": group, "status": status})
        return ok(result.message, result.data)

    @app.get("/api/attendance/sessions")
    def list_sessions(request: Request, bot: Optional[str] = None):
        handle = svc.require_running(bot)
        result = svc.run(request, handle, eng.ListSessions(),
                         "list_sessions", {}, audited=False)
        return ok(result.message, result.data)

    @app.get("/api/attendance/sessions/{session_id}")
    def get_session(request: Request, session_id: str):
        handle = svc.handle_for_entity(session_id)
        result = svc.run(request, handle, eng.GetSession(session_id=session_id),
                         "get_session", {"session_id": session_id}, audited=False)
        return ok(result.message, result.data)

    # -- surveys -------------------------------------------------------------

    @app.post("/api/surveys/simple")
    def survey_simple(request: Request, payload: dict = Body(...)):
        handle = svc.require_running(payload.get("bot"))
        cmd = eng.CreateSimpleSurvey(
            title=_need_str(payload, "title"),
            prompt=_need_str(payload, "prompt"),
            channel_id=_need_str(payload, "channel_id"),
            options=tuple(payload.get("options", ())),
            duration_s=_opt_positive_int(payload, "duration_s"),
        )
        result = svc.run(request, handle, cmd, "survey_simple",
                         {"title": cmd.title})
        return ok(result.message, result.data)

    @app.post("/api/surveys/complex")
    def survey_complex(request: Request, payload: dict = Body(...)):
        handle = svc.require_running(payload.get("bot"))
        questions = payload.get("questions")
        if not isinstance(questions, list) or not questions:
            raise InvalidInput("'questions' must be a non-empty list")
        for q in questions:
            if not isinstance(q, dict):
                raise InvalidInput("each question must be an object")
            _need_str(q, "prompt")
            _need_str(q, "response_type")
        cmd = eng.CreateComplexSurvey(
            title=_need_str(payload, "title"),
            channel_id=_need_str(payload, "channel_id"),
            questions=tuple(questions),
            duration_s=_opt_positive_int(payload, "duration_s"),
        )
        result = svc.run(request, handle, cmd, "survey_complex",
                         {"title": cmd.title, "questions": len(questions)})
        return ok(result.message, result.data)

    @app.get("/api/surveys")
    def list_surveys(request: Request, bot: Optional[str] = None):
        handle = svc.require_running(bot)
        result = svc.run(request, handle, eng.ListSurveys(),
                         "list_surveys", {}, audited=False)
        return ok(result.message, result.data)

    @app.get("/api/surveys/{survey_id}/results")
    def survey_results(request: Request, survey_id: str):
        handle = svc.handle_for_entity(survey_id)
        result = svc.run(request, handle, eng.SurveyResults(survey_id=survey_id),
                         "survey_results", {"survey_id": survey_id}, audited=False)
        return ok(result.message, result.data)

    # -- feedback -----------------------------------------------------------

    @app.post("/api/feedback")
    def feedback(request: Request, payload: dict = Body(...)):
        handle = svc.require_running(payload.get("bot"))
        cmd = eng.StartFeedback(label=_need_str(payload, "label"),
                                channel_id=_need_str(payload, "channel_id"))
        result = svc.run(request, handle, cmd, "feedback", {"label": cmd.label})
        return ok(result.message, result.data)

    @app.get("/api/feedback")
    def list_feedback(request: Request, bot: Optional[str] = None):
        handle = svc.require_running(bot)
        result = svc.run(request, handle, eng.ListFeedback(),
                         "list_feedback", {}, audited=False)
        return ok(result.message, result.data)

    @app.get("/api/feedback/{feedback_id}/results")
    def feedback_results(request: Request, feedback_id: str):
        handle = svc.handle_for_entity(feedback_id)
        result = svc.run(request, handle,
                         eng.FeedbackResults(feedback_id=feedback_id),
                         "feedback_results", {"feedback_id": feedback_id},
                         audited=False)
        return ok(result.message, result.data)

    # -- bots ---------------------------------------------------------------

    @app.get("/api/bots")
    def list_bots(request: Request):
        return ok("Bots listed",
                  {"bots": [b.to_record() for b in svc.bots.values()]})

    @app.post("/api/bots")
    def create_bot(request: Request, payload: dict = Body(...)):
        bot = svc.create_bot(payload, request.state.key_id)
        return ok(f"Bot {bot.id} created", bot.to_record())

    @app.post("/api/bots/{bot_id}/start")
    def start_bot(request: Request, bot_id: str):
        bot = svc.start_bot(bot_id, request.state.key_id)
        return ok(f"Bot {bot.id} is running", bot.to_record())

    @app.post("/api/bots/{bot_id}/stop")
    def stop_bot(request: Request, bot_id: str):
        bot = svc.stop_bot(bot_id, request.state.key_id)
        return ok(f"Bot {bot.id} stopped", bot.to_record())

    @app.delete("/api/bots/{bot_id}")
    def delete_bot(request: Request, bot_id: str):
        svc.delete_bot(bot_id, request.state.key_id)
        return ok(f"Bot {bot_id} deleted")

    # -- utility commands ------------------------------------------------------

    @app.post("/api/commands/ping")
    def command_ping(request: Request, bot: Optional[str] = None):
        handle = svc.require_running(bot)
        result = svc.run(request, handle, eng.PingChat(), "ping", {})
        return ok(result.message, result.data)

    @app.post("/api/commands/send-message")
    def command_send_message(request: Request, payload: dict = Body(...)):
        handle = svc.require_running(payload.get("bot"))
        cmd = eng.PostMessage(channel_id=_need_str(payload, "channel_id"),
                              text=_need_str(payload, "text"))
        result = svc.run(request, handle, cmd, "send_message",
                         {"channel_id": cmd.channel_id})
        return ok(result.message, result.data)

    @app.post("/api/commands/give-role")
    def command_give_role(request: Request, payload: dict = Body(...)):
        handle = svc.require_running(payload.get("bot"))
        cmd = eng.AssignRole(member_id=_need_str(payload, "member_id"),
                             role=_need_str(payload, "role"))
        result = svc.run(request, handle, cmd, "give_role",
                         {"member_id": cmd.member_id, "role": cmd.role})
        return ok(result.message, result.data)

    @app.post("/api/commands/clear-messages")
    def command_clear_messages(request: Request, payload: dict = Body(...)):
        handle = svc.require_running(payload.get("bot"))
        limit = payload.get("limit")
        if isinstance(limit, bool) or not isinstance(limit, int):
            raise InvalidInput("'limit' must be an integer")
        cmd = eng.ClearMessages(channel_id=_need_str(payload, "channel_id"),
                                limit=limit)
        result = svc.run(request, handle, cmd, "clear_messages",
                         {"channel_id": cmd.channel_id, "limit": limit})
        return ok(result.message, result.data)

    @app.get("/api/presence")
    def presence(request: Request, bot: Optional[str] = None):
        handle = svc.require_running(bot)
        result = svc.run(request, handle, eng.GetPresence(),
                         "presence", {}, audited=False)
        return ok(result.message, result.data)

    app.add_middleware(AuthRateLimitMiddleware, service=service)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=[service.config.console_origin],
        allow_methods=["GET", "POST", "DELETE", "OPTIONS"],
        allow_headers=["Authorization", "Content-Type"],
    )
    return app
