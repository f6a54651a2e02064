"""Scenario replay and load generation against the full service stack.

Two jobs live here:

* ``run_suite`` replays JSONL scenarios through the real HTTP surface
  (in-process transport) and compares the resulting state projection,
  registry plus exported CSV rows, against a golden file.
* ``run_load`` hosts the service on a loopback socket and hammers it
  from concurrent instructor threads while scripted students act
  in-process, reporting request latency percentiles.

Goldens are never produced by the service itself: ``golden_state`` is a
deliberately plain brute-force interpreter of the scenario that builds
the expected projection from the documented rules alone. If the engine
and this interpreter disagree, the suite fails.
"""

from __future__ import annotations

import json
import math
import statistics
import tempfile
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Callable, List, Optional

from . import engine as eng
from .api import Service, ServiceConfig, create_app
from .core import InvalidInput
from .gateway import (
    Scenario,
    ScenarioError,
    SimClock,
    SimulatedChatPlatform,
    WallClock,
    parse_scenario,
)
from .persistence import read_csv_rows

#: Scenario time starts here; step ``at_ms`` offsets are added to it.
BASE_TIME = datetime(2025, 1, 6, 9, 0, 0, tzinfo=timezone.utc)

#: The runner advances the clock this far past the last step before the
#: final sweep, so throttled tally edits and due timeouts settle.
FINALIZE_ADVANCE_MS = 1500

_FIVE_LABELS = ("Very Easy", "Easy", "Moderate", "Hard", "Very Hard")
_DIALOG_EXPIRY_S = 15 * 60
_COMMENT_WINDOW_S = 2 * 60


# ---------------------------------------------------------------------------
# Golden-state oracle (independent brute force, no engine code)
# ---------------------------------------------------------------------------

def _iso(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).isoformat()


@dataclass
class _OBot:
    id: str
    name: str
    guild_id: str
    mode: str
    created_at: datetime
    groups: list
    running: bool = False
    sessions: list = field(default_factory=list)    # dicts, creation order
    surveys: list = field(default_factory=list)     # dicts, creation order
    responses: dict = field(default_factory=dict)   # survey_id -> [dicts]
    feedback: list = field(default_factory=list)    # dicts
    counters: dict = field(default_factory=lambda: {"att": 0, "srv": 0, "fbk": 0})
    dialogs: dict = field(default_factory=dict)     # member -> dict
    windows: dict = field(default_factory=dict)     # member -> (fbk_id, deadline)


class _Oracle:
    def __init__(self, scenario: Scenario):
        self.members = {mid: name for mid, name in scenario.members}
        self.bots: dict = {}
        self.bot_seq = 0
        self.csv: dict = {}

    # -- time -------------------------------------------------------------

    def sweep(self, t: datetime) -> None:
        for bot in self.bots.values():
            if not bot.running:
                continue
            for survey in bot.surveys:
                if (survey["state"] == "open" and survey["duration_s"] is not None
                        and (t - survey["_opened"]).total_seconds()
                        >= survey["duration_s"]):
                    survey["state"] = "closed"
                    survey["closed_at"] = _iso(t)
                    for member in [m for m, d in bot.dialogs.items()
                                   if d["survey_id"] == survey["id"]]:
                        del bot.dialogs[member]
                    self._export_survey(bot, survey)
            for member in [m for m, d in bot.dialogs.items()
                           if (t - d["last"]).total_seconds() >= _DIALOG_EXPIRY_S]:
                del bot.dialogs[member]
            for member in [m for m, (_, deadline) in bot.windows.items()
                           if t >= deadline]:
                del bot.windows[member]

    # -- api steps -----------------------------------------------------------

    def api(self, payload: dict, t: datetime) -> None:
        if payload.get("expect_status", 200) != 200:
            return  # a step expected to fail must leave no trace
        method = payload["method"].upper()
        path = payload["path"]
        body = payload.get("body", {})
        query = payload.get("query", {})
        if method == "POST" and path == "/api/bots":
            self.bot_seq += 1
            bot_id = f"b{self.bot_seq}"
            groups = [{"id": g["id"], "channel_id": g["channel_id"],
                       "roster": sorted(g.get("roster", []))}
                      for g in body.get("groups", [])]
            self.bots[bot_id] = _OBot(
                id=bot_id, name=body["name"], guild_id=body["guild_id"],
                mode=body.get("mode", "development"), created_at=t,
                groups=groups,
            )
        elif method == "POST" and path.startswith("/api/bots/") and path.endswith("/start"):
            self.bots[path.split("/")[3]].running = True
        elif method == "POST" and path.startswith("/api/bots/") and path.endswith("/stop"):
            self.bots[path.split("/")[3]].running = False
        elif method == "DELETE" and path.startswith("/api/bots/"):
            del self.bots[path.split("/")[3]]
        elif method == "POST" and path == "/api/attendance":
            self._attendance(query, t)
        elif method == "POST" and path == "/api/surveys/simple":
            self._survey_simple(body, t)
        elif method == "POST" and path == "/api/surveys/complex":
            self._survey_complex(body, t)
        elif method == "POST" and path == "/api/feedback":
            self._feedback(body, t)
        # utility commands and reads leave no durable state behind

    def _pick_bot(self, explicit: Optional[str]) -> _OBot:
        if explicit is not None:
            return self.bots[explicit]
        running = [b for b in self.bots.values() if b.running]
        if len(running) != 1:
            raise ScenarioError(
                "cannot tell which bot a step targets; pass bot=<id>")
        return running[0]

    def _attendance(self, query: dict, t: datetime) -> None:
        bot = self._pick_bot(query.get("bot"))
        status = query["status"]
        group_id = query["group"]
        if status == "start":
            code = query.get("code")
            if code is None:
                raise ScenarioError(
                    "golden scenarios must pass an explicit attendance code")
            bot.counters["att"] += 1
            bot.sessions.append({
                "id": f"{bot.id}-att-{bot.counters['att']}",
                "group_id": group_id, "code": code, "state": "open",
                "opened_at": _iso(t), "closed_at": None, "checkins": [],
                "_opened": t,
            })
        elif status == "stop":
            for session in bot.sessions:
                if session["group_id"] == group_id and session["state"] == "open":
                    session["state"] = "closed"
                    session["closed_at"] = _iso(t)
                    self._export_attendance(session)
                    return
            raise ScenarioError(f"stop for group {group_id} with no open session")

    def _survey_simple(self, body: dict, t: datetime) -> None:
        bot = self._pick_bot(body.get("bot"))
        bot.counters["srv"] += 1
        sid = f"{bot.id}-srv-{bot.counters['srv']}"
        options = list(body.get("options") or _FIVE_LABELS)
        bot.surveys.append({
            "id": sid, "kind": "simple", "title": body["title"],
            "channel_id": body["channel_id"],
            "questions": [{"index": 0, "prompt": body["prompt"],
                           "response_type": "five_level", "options": options}],
            "duration_s": body.get("duration_s"), "state": "open",
            "opened_at": _iso(t), "closed_at": None, "_opened": t,
        })
        bot.responses[sid] = []

    def _survey_complex(self, body: dict, t: datetime) -> None:
        bot = self._pick_bot(body.get("bot"))
        bot.counters["srv"] += 1
        sid = f"{bot.id}-srv-{bot.counters['srv']}"
        questions = []
        for i, q in enumerate(body["questions"]):
            if q["response_type"] == "five_level":
                options = list(q.get("options") or _FIVE_LABELS)
            else:
                options = []
            questions.append({"index": i, "prompt": q["prompt"],
                              "response_type": q["response_type"],
                              "options": options})
        bot.surveys.append({
            "id": sid, "kind": "complex", "title": body["title"],
            "channel_id": body["channel_id"], "questions": questions,
            "duration_s": body.get("duration_s"), "state": "open",
            "opened_at": _iso(t), "closed_at": None, "_opened": t,
        })
        bot.responses[sid] = []

    def _feedback(self, body: dict, t: datetime) -> None:
        bot = self._pick_bot(body.get("bot"))
        bot.counters["fbk"] += 1
        bot.feedback.append({
            "id": f"{bot.id}-fbk-{bot.counters['fbk']}",
            "channel_id": body["channel_id"], "label": body["label"],
            "state": "open", "responses": [],
        })

    # -- chat steps ---------------------------------------------------------

    def chat(self, payload: dict, t: datetime) -> None:
        event = payload["event"]
        member = payload.get("member", "")
        for bot in self.bots.values():
            if not bot.running:
                continue
            if event == "dm":
                self._dm(bot, member, payload["text"], t)
            elif event == "click":
                self._click(bot, member, payload["custom_id"], t)
            # presence changes carry no durable state

    def _dm(self, bot: _OBot, member: str, text: str, t: datetime) -> None:
        stripped = text.strip()
        dialog = bot.dialogs.get(member)
        if dialog is not None:
            self._dialog_answer(bot, dialog, stripped, t)
            return
        window = bot.windows.get(member)
        if window is not None:
            fbk_id, deadline = window
            del bot.windows[member]
            if t < deadline:
                self._attach_comment(bot, fbk_id, member, stripped)
                return
        for session in bot.sessions:
            if session["state"] != "open" or session["code"] != stripped:
                continue
            roster = next((g["roster"] for g in bot.groups
                           if g["id"] == session["group_id"]), [])
            if member not in roster:
                return
            if any(c["student_id"] == member for c in session["checkins"]):
                return
            session["checkins"].append({
                "student_id": member,
                "display_name": self.members.get(member, member),
                "at": _iso(t),
            })
            return

    def _click(self, bot: _OBot, member: str, custom_id: str, t: datetime) -> None:
        parts = custom_id.split(":")
        if parts[0] == "vote" and len(parts) == 3:
            survey = self._survey(bot, parts[1])
            if survey is None or survey["state"] != "open":
                return
            if parts[2] not in {"1", "2", "3", "4", "5"}:
                return
            self._store_response(bot, survey, 0, member, "five_level",
                                 int(parts[2]), t)
        elif parts[0] == "join" and len(parts) == 2:
            survey = self._survey(bot, parts[1])
            if survey is None or survey["state"] != "open":
                return
            if member in bot.dialogs:
                return
            bot.dialogs[member] = {"survey_id": survey["id"], "next": 0,
                                   "last": t}
        elif parts[0] == "fbk" and len(parts) == 3:
            fb = next((f for f in bot.feedback if f["id"] == parts[1]), None)
            if fb is None or fb["state"] != "open":
                return
            if parts[2] not in {"1", "2", "3", "4", "5"}:
                return
            level = int(parts[2])
            existing = next((r for r in fb["responses"]
                             if r["student_id"] == member), None)
            if existing is not None:
                existing["level"] = level
                existing["at"] = _iso(t)
            else:
                fb["responses"].append({"student_id": member, "level": level,
                                        "comment": None, "at": _iso(t)})
            bot.windows[member] = (fb["id"], t + timedelta(seconds=_COMMENT_WINDOW_S))

    def _dialog_answer(self, bot: _OBot, dialog: dict, text: str, t: datetime) -> None:
        member = [m for m, d in bot.dialogs.items() if d is dialog][0]
        survey = self._survey(bot, dialog["survey_id"])
        if survey is None or survey["state"] != "open":
            del bot.dialogs[member]
            return
        question = survey["questions"][dialog["next"]]
        value = self._parse(question, text)
        if value is None:
            dialog["last"] = t
            return
        self._store_response(bot, survey, question["index"], member,
                             question["response_type"], value, t)
        dialog["next"] += 1
        dialog["last"] = t
        if dialog["next"] >= len(survey["questions"]):
            del bot.dialogs[member]

    @staticmethod
    def _parse(question: dict, text: str):
        if question["response_type"] == "five_level":
            if text in {"1", "2", "3", "4", "5"}:
                return int(text)
            for i, label in enumerate(question["options"], start=1):
                if label.casefold() == text.casefold():
                    return i
            return None
        if question["response_type"] == "percentage":
            raw = text[:-1].strip() if text.endswith("%") else text
            try:
                value = int(raw)
            except ValueError:
                return None
            return value if 0 <= value <= 100 else None
        return text if text else None

    @staticmethod
    def _survey(bot: _OBot, survey_id: str):
        return next((s for s in bot.surveys if s["id"] == survey_id), None)

    def _store_response(self, bot: _OBot, survey: dict, index: int, member: str,
                        response_type: str, value, t: datetime) -> None:
        record = {"survey_id": survey["id"], "question_index": index,
                  "student_id": member, "response_type": response_type,
                  "value": value, "at": _iso(t)}
        bucket = bot.responses[survey["id"]]
        for i, existing in enumerate(bucket):
            if (existing["student_id"] == member
                    and existing["question_index"] == index):
                bucket[i] = record
                return
        bucket.append(record)

    def _attach_comment(self, bot: _OBot, fbk_id: str, member: str,
                        comment: str) -> None:
        fb = next((f for f in bot.feedback if f["id"] == fbk_id), None)
        if fb is None:
            return
        for r in fb["responses"]:
            if r["student_id"] == member:
                r["comment"] = comment
                return

    # -- exports -------------------------------------------------------------

    def _export_attendance(self, session: dict) -> None:
        self.csv[f"attendance/{session['id']}.csv"] = [
            {"session_id": session["id"], "group_id": session["group_id"],
             "code": session["code"], "student_id": c["student_id"],
             "display_name": c["display_name"], "checkin_ts": c["at"]}
            for c in session["checkins"]
        ]

    def _export_survey(self, bot: _OBot, survey: dict) -> None:
        prompts = {q["index"]: q["prompt"] for q in survey["questions"]}
        self.csv[f"surveys/{survey['id']}.csv"] = [
            {"survey_id": survey["id"],
             "question_index": str(r["question_index"]),
             "prompt": prompts[r["question_index"]],
             "student_id": r["student_id"],
             "response_type": r["response_type"],
             "value": str(r["value"]), "ts": r["at"]}
            for r in bot.responses[survey["id"]]
        ]

    # -- projection ------------------------------------------------------------

    def shutdown(self) -> None:
        for bot in self.bots.values():
            bot.running = False

    def registry(self) -> dict:
        out = {}
        for bot in self.bots.values():
            sessions = []
            for s in bot.sessions:
                rec = {k: v for k, v in s.items() if not k.startswith("_")}
                sessions.append(rec)
            surveys = []
            for s in bot.surveys:
                rec = {k: v for k, v in s.items() if not k.startswith("_")}
                surveys.append(rec)
            out[bot.id] = {
                "bot": {"id": bot.id, "name": bot.name,
                        "guild_id": bot.guild_id, "mode": bot.mode,
                        "state": "stopped", "created_at": _iso(bot.created_at)},
                "groups": bot.groups,
                "sessions": sessions,
                "surveys": surveys,
                "responses": bot.responses,
                "feedback": bot.feedback,
                "counters": bot.counters,
            }
        return out


def golden_state(scenario: Scenario) -> dict:
    """Expected end-of-run projection, computed without the service."""
    oracle = _Oracle(scenario)
    last_at = 0
    for step in scenario.steps:
        t = BASE_TIME + timedelta(milliseconds=step.at_ms)
        oracle.sweep(t)
        if step.kind == "api":
            oracle.api(step.payload, t)
        else:
            oracle.chat(step.payload, t)
        last_at = step.at_ms
    oracle.sweep(BASE_TIME + timedelta(milliseconds=last_at + FINALIZE_ADVANCE_MS))
    oracle.shutdown()
    return {"registry": {"bots": oracle.registry()}, "csv": oracle.csv}


# ---------------------------------------------------------------------------
# Scenario replay through the real stack
# ---------------------------------------------------------------------------

@dataclass
class ScenarioRun:
    projection: dict
    event_stream: bytes
    registry_bytes: bytes
    failures: list


def state_projection(data_dir: Path) -> dict:
    registry_path = Path(data_dir) / "registry.json"
    registry = json.loads(registry_path.read_text(encoding="utf-8")) \
        if registry_path.exists() else {"bots": {}}
    csv_files = {}
    for sub in ("attendance", "surveys"):
        directory = Path(data_dir) / "data" / sub
        if directory.exists():
            for path in sorted(directory.glob("*.csv")):
                csv_files[f"{sub}/{path.name}"] = read_csv_rows(path)
    return {"registry": registry, "csv": csv_files}


def run_scenario(scenario: Scenario, workdir: Path) -> ScenarioRun:
    """Replay one scenario against a fresh service and project its state."""
    from fastapi.testclient import TestClient

    workdir = Path(workdir)
    clock = SimClock(BASE_TIME)
    platform = SimulatedChatPlatform(clock=clock, seed=scenario.seed)
    platform.create_guild(scenario.guild_id)
    for channel in scenario.channels:
        platform.create_channel(scenario.guild_id, channel)
    for member_id, display_name in scenario.members:
        platform.add_member(scenario.guild_id, member_id, display_name)

    config = ServiceConfig(
        data_dir=workdir,
        secrets_path=workdir / ".secrets.json",
        passphrase="scenario-replay",
        seed=scenario.seed,
        # replay compresses hours into milliseconds of real time, so the
        # production request budget does not apply here
        rate_limit_max=10 ** 9,
        idle_sweep_s=None,
    )
    service = Service(config, gateway=platform)
    app = create_app(service)
    _, bearer = service.add_api_key("scenario-runner")
    headers = {"Authorization": f"Bearer {bearer}"}

    failures: list = []
    client = TestClient(app)
    try:
        last_at = 0
        for i, step in enumerate(scenario.steps, start=1):
            clock.set(BASE_TIME + timedelta(milliseconds=step.at_ms))
            last_at = step.at_ms
            if step.kind == "api":
                payload = step.payload
                expect = payload.get("expect_status", 200)
                response = client.request(
                    payload["method"].upper(), payload["path"],
                    params=payload.get("query"), headers=headers,
                    json=payload.get("body") if payload.get("body") is not None
                    else None,
                )
                if response.status_code != expect:
                    failures.append(
                        f"step {i}: {payload['method']} {payload['path']} "
                        f"returned {response.status_code}, expected {expect}: "
                        f"{response.text[:200]}")
            else:
                payload = step.payload
                try:
                    if payload["event"] == "dm":
                        platform.member_dm(scenario.guild_id,
                                           payload["member"], payload["text"])
                    elif payload["event"] == "click":
                        platform.member_click(scenario.guild_id,
                                              payload["member"],
                                              payload["custom_id"])
                    else:
                        platform.set_presence(scenario.guild_id,
                                              payload["member"],
                                              bool(payload.get("online", True)))
                except Exception as exc:
                    failures.append(f"step {i}: chat event failed: {exc}")
        clock.set(BASE_TIME + timedelta(milliseconds=last_at + FINALIZE_ADVANCE_MS))
        for handle in list(service.handles.values()):
            handle.submit(eng.Sweep())
    finally:
        service.shutdown()
        client.close()

    registry_path = workdir / "registry.json"
    return ScenarioRun(
        projection=state_projection(workdir),
        event_stream=platform.event_stream_bytes(),
        registry_bytes=registry_path.read_bytes() if registry_path.exists() else b"",
        failures=failures,
    )


def first_difference(expected, actual, path: str = "$") -> Optional[str]:
    """Human-oriented pointer at the first spot two projections diverge."""
    if type(expected) is not type(actual):
        return (f"{path}: type {type(expected).__name__} != "
                f"{type(actual).__name__}")
    if isinstance(expected, dict):
        for key in sorted(set(expected) | set(actual)):
            if key not in expected:
                return f"{path}.{key}: unexpected key"
            if key not in actual:
                return f"{path}.{key}: missing key"
            diff = first_difference(expected[key], actual[key], f"{path}.{key}")
            if diff:
                return diff
        return None
    if isinstance(expected, list):
        if len(expected) != len(actual):
            return f"{path}: length {len(expected)} != {len(actual)}"
        for i, (e, a) in enumerate(zip(expected, actual)):
            diff = first_difference(e, a, f"{path}[{i}]")
            if diff:
                return diff
        return None
    if expected != actual:
        return f"{path}: {expected!r} != {actual!r}"
    return None


# ---------------------------------------------------------------------------
# Suite runner
# ---------------------------------------------------------------------------

@dataclass
class SuiteOutcome:
    name: str
    passed: bool
    reason: str = ""


@dataclass
class SuiteResult:
    outcomes: List[SuiteOutcome]

    @property
    def passed(self) -> bool:
        return all(o.passed for o in self.outcomes)


def scenario_files(directory: Path) -> List[Path]:
    files = sorted(p for p in Path(directory).glob("*.jsonl"))
    if not files:
        raise InvalidInput(f"no .jsonl scenarios under {directory}")
    return files


def golden_path_for(scenario_path: Path) -> Path:
    return scenario_path.with_suffix(".golden.json")


def write_goldens(directory: Path) -> List[Path]:
    """Create or refresh ``*.golden.json`` next to each scenario."""
    written = []
    for path in scenario_files(directory):
        scenario = parse_scenario(path.read_text(encoding="utf-8"),
                                  name=path.stem)
        golden = golden_state(scenario)
        out = golden_path_for(path)
        out.write_text(json.dumps(golden, indent=2, sort_keys=True) + "\n",
                       encoding="utf-8")
        written.append(out)
    return written


def run_suite(directory: Path,
              log: Callable[[str], None] = lambda line: None) -> SuiteResult:
    outcomes = []
    for path in scenario_files(directory):
        scenario = parse_scenario(path.read_text(encoding="utf-8"),
                                  name=path.stem)
        golden_file = golden_path_for(path)
        if not golden_file.exists():
            raise InvalidInput(f"missing golden file {golden_file}")
        golden = json.loads(golden_file.read_text(encoding="utf-8"))
        with tempfile.TemporaryDirectory(prefix="suite-") as tmp:
            run = run_scenario(scenario, Path(tmp))
        if run.failures:
            outcome = SuiteOutcome(scenario.name, False,
                                   "; ".join(run.failures[:3]))
        else:
            diff = first_difference(golden, run.projection)
            outcome = SuiteOutcome(scenario.name, diff is None, diff or "")
        outcomes.append(outcome)
        log(f"{'PASS' if outcome.passed else 'FAIL'} {outcome.name}"
            + (f": {outcome.reason}" if outcome.reason else ""))
    return SuiteResult(outcomes)


# ---------------------------------------------------------------------------
# Load runner
# ---------------------------------------------------------------------------

@dataclass
class LoadConfig:
    instructors: int = 12
    students: int = 50          # per instructor
    seed: int = 7
    threshold_ms: float = 300.0
    spacing_s: float = 0.4      # pause between REST calls per instructor
    report_path: Optional[Path] = None
    workdir: Optional[Path] = None


@dataclass
class LoadReport:
    requests: int
    errors: int
    latency_ms: dict
    threshold_ms: float
    passed: bool
    duration_s: float
    by_route: dict
    started_at: str

    def to_record(self) -> dict:
        return {
            "requests": self.requests, "errors": self.errors,
            "latency_ms": self.latency_ms, "threshold_ms": self.threshold_ms,
            "passed": self.passed, "duration_s": self.duration_s,
            "by_route": self.by_route, "started_at": self.started_at,
        }


def _percentile(samples: List[float], fraction: float) -> float:
    """Nearest-rank percentile: the ceil(fraction * n)-th smallest sample."""
    ordered = sorted(samples)
    if not ordered:
        return 0.0
    rank = max(math.ceil(fraction * len(ordered)), 1)
    return ordered[min(rank, len(ordered)) - 1]


class _HostedServer:
    """uvicorn on 127.0.0.1:<free port> in a background thread."""

    def __init__(self, app):
        import uvicorn

        self._config = uvicorn.Config(app, host="127.0.0.1", port=0,
                                      log_level="warning", lifespan="on")
        self._server = uvicorn.Server(self._config)
        self._thread = threading.Thread(target=self._server.run, daemon=True)

    def __enter__(self) -> str:
        self._thread.start()
        deadline = time.monotonic() + 10
        while not self._server.started:
            if time.monotonic() > deadline:
                raise InvalidInput("server did not come up within 10s")
            if not self._thread.is_alive():
                raise InvalidInput("server thread died during startup")
            time.sleep(0.01)
        port = self._server.servers[0].sockets[0].getsockname()[1]
        return f"http://127.0.0.1:{port}"

    def __exit__(self, *exc_info) -> None:
        self._server.should_exit = True
        self._thread.join(timeout=10)


@dataclass
class _Sample:
    route: str
    method: str
    status: int
    latency_ms: float


class _Instructor(threading.Thread):
    """One instructor's scripted classroom: attendance, survey, feedback."""

    def __init__(self, index: int, base_url: str, bearer: str,
                 platform: SimulatedChatPlatform, guild_id: str,
                 students: List[str], spacing_s: float):
        super().__init__(name=f"instructor-{index}", daemon=True)
        self.index = index
        self.base_url = base_url
        self.bearer = bearer
        self.platform = platform
        self.guild_id = guild_id
        self.students = students
        self.spacing_s = spacing_s
        self.samples: List[_Sample] = []
        self.error: Optional[str] = None

    def run(self) -> None:
        import httpx

        group = f"g{self.index}"
        code = f"{1000 + self.index:04d}"
        try:
            with httpx.Client(base_url=self.base_url, timeout=10.0,
                              headers={"Authorization": f"Bearer {self.bearer}"}) as client:
                start = self._call(client, "POST", "/api/attendance",
                                   params={"code": code, "group": group,
                                           "status": "start"})
                for student in self.students:
                    self.platform.member_dm(self.guild_id, student, code)
                self._call(client, "GET", "/api/attendance/sessions")
                for _ in range(3):
                    self._call(client, "POST", "/api/commands/ping")
                self._call(client, "POST", "/api/commands/send-message",
                           json={"channel_id": f"c{self.index}",
                                 "text": f"hello from instructor {self.index}"})
                stop = self._call(client, "POST", "/api/attendance",
                                  params={"group": group, "status": "stop"})
                survey = self._call(client, "POST", "/api/surveys/simple",
                                    json={"title": f"pulse {self.index}",
                                          "prompt": "How hard was today?",
                                          "channel_id": f"c{self.index}"})
                survey_id = survey.json()["data"]["survey_id"]
                for n, student in enumerate(self.students):
                    self.platform.member_click(
                        self.guild_id, student, f"vote:{survey_id}:{n % 5 + 1}")
                self._call(client, "GET", f"/api/surveys/{survey_id}/results")
                feedback = self._call(client, "POST", "/api/feedback",
                                      json={"label": f"lecture {self.index}",
                                            "channel_id": f"c{self.index}"})
                feedback_id = feedback.json()["data"]["feedback_id"]
                for n, student in enumerate(self.students[:10]):
                    self.platform.member_click(
                        self.guild_id, student, f"fbk:{feedback_id}:{n % 5 + 1}")
                self._call(client, "GET", f"/api/feedback/{feedback_id}/results")
                self._call(client, "GET", "/api/attendance/sessions/"
                           + start.json()["data"]["session_id"])
                del stop
        except Exception as exc:  # surfaced in the report
            self.error = f"{type(exc).__name__}: {exc}"

    def _call(self, client, method: str, path: str, **kwargs):
        time.sleep(self.spacing_s)
        started = time.perf_counter()
        response = client.request(method, path, **kwargs)
        elapsed_ms = (time.perf_counter() - started) * 1000.0
        self.samples.append(_Sample(route=_route_label(path), method=method,
                                    status=response.status_code,
                                    latency_ms=elapsed_ms))
        if response.status_code != 200:
            raise InvalidInput(
                f"{method} {path} -> {response.status_code}: {response.text[:200]}")
        return response


def _route_label(path: str) -> str:
    """Collapse entity ids so samples group per route."""
    parts = path.split("/")
    return "/".join("{id}" if "-att-" in p or "-srv-" in p or "-fbk-" in p
                    else p for p in parts)


def run_load(config: LoadConfig) -> LoadReport:
    """Host the service on loopback and measure instructor-side latency."""
    import httpx

    started_at = datetime.now(timezone.utc)
    t0 = time.monotonic()
    workdir = Path(config.workdir) if config.workdir else None
    tmp_ctx = tempfile.TemporaryDirectory(prefix="load-") if workdir is None else None
    data_dir = workdir if workdir is not None else Path(tmp_ctx.name)

    guild_id = "load-guild"
    platform = SimulatedChatPlatform(clock=WallClock(), seed=config.seed)
    platform.create_guild(guild_id)
    groups = []
    students_by_group: dict = {}
    for i in range(1, config.instructors + 1):
        channel = f"c{i}"
        platform.create_channel(guild_id, channel)
        students = [f"s{i}-{j}" for j in range(1, config.students + 1)]
        for j, student in enumerate(students, start=1):
            platform.add_member(guild_id, student, f"Student {i}.{j}")
        students_by_group[i] = students
        groups.append({"id": f"g{i}", "channel_id": channel,
                       "roster": students})

    service = Service(ServiceConfig(
        data_dir=data_dir,
        secrets_path=data_dir / ".secrets.json",
        passphrase="load-run",
        seed=config.seed,
    ), gateway=platform)
    app = create_app(service)

    _, admin_bearer = service.add_api_key("load-admin")
    instructor_bearers = [service.add_api_key(f"instructor-{i}")[1]
                          for i in range(1, config.instructors + 1)]

    samples: List[_Sample] = []
    errors: List[str] = []
    try:
        with _HostedServer(app) as base_url:
            with httpx.Client(base_url=base_url, timeout=10.0, headers={
                    "Authorization": f"Bearer {admin_bearer}"}) as admin:
                response = admin.post("/api/bots", json={
                    "name": "load-bot", "guild_id": guild_id,
                    "token": "load-token", "groups": groups,
                })
                response.raise_for_status()
                bot_id = response.json()["data"]["id"]
                admin.post(f"/api/bots/{bot_id}/start").raise_for_status()

            threads = [
                _Instructor(i, base_url, instructor_bearers[i - 1], platform,
                            guild_id, students_by_group[i], config.spacing_s)
                for i in range(1, config.instructors + 1)
            ]
            for thread in threads:
                thread.start()
            for thread in threads:
                thread.join(timeout=110)
            for thread in threads:
                samples.extend(thread.samples)
                if thread.error:
                    errors.append(f"{thread.name}: {thread.error}")
                if thread.is_alive():
                    errors.append(f"{thread.name}: did not finish in time")
    finally:
        if tmp_ctx is not None:
            tmp_ctx.cleanup()

    latencies = [s.latency_ms for s in samples]
    by_route: dict = {}
    for s in samples:
        bucket = by_route.setdefault(s.route, [])
        bucket.append(s.latency_ms)
    route_stats = {
        route: {"count": len(vals),
                "p95_ms": round(_percentile(vals, 0.95), 3)}
        for route, vals in sorted(by_route.items())
    }
    bad_status = sum(1 for s in samples if s.status != 200)
    report = LoadReport(
        requests=len(samples),
        errors=len(errors) + bad_status,
        latency_ms={
            "mean": round(statistics.fmean(latencies), 3) if latencies else 0.0,
            "p50": round(_percentile(latencies, 0.50), 3),
            "p95": round(_percentile(latencies, 0.95), 3),
            "p99": round(_percentile(latencies, 0.99), 3),
            "max": round(max(latencies), 3) if latencies else 0.0,
        },
        threshold_ms=config.threshold_ms,
        passed=(not errors and bad_status == 0 and len(samples) > 0
                and _percentile(latencies, 0.95) <= config.threshold_ms),
        duration_s=round(time.monotonic() - t0, 3),
        by_route=route_stats,
        started_at=started_at.isoformat(),
    )
    if errors:
        report.by_route["_errors"] = errors[:10]

    if config.report_path is not None:
        _write_load_artifacts(Path(config.report_path), report, samples)
    return report


def _write_load_artifacts(report_path: Path, report: LoadReport,
                          samples: List[_Sample]) -> None:
    import csv as csvmod

    report_path.parent.mkdir(parents=True, exist_ok=True)
    report_path.write_text(json.dumps(report.to_record(), indent=2,
                                      sort_keys=True) + "\n", encoding="utf-8")
    samples_path = report_path.with_suffix(".samples.csv")
    with open(samples_path, "w", newline="", encoding="utf-8") as fh:
        writer = csvmod.writer(fh)
        writer.writerow(["route", "method", "status", "latency_ms"])
        for s in samples:
            writer.writerow([s.route, s.method, s.status,
                             f"{s.latency_ms:.3f}"])
    from .reporting import render_latency_histogram

    render_latency_histogram([s.latency_ms for s in samples],
                             report.threshold_ms,
                             report_path.with_suffix(".latency.png"))
