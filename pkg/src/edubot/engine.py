"""Interaction engine: the per-bot state machines behind every command.

One :class:`Engine` instance owns all mutable state for one bot. It is
single-threaded by construction: the service wraps it in an
:class:`EngineHandle`, a worker thread fed by a queue, so commands and
chat events are applied strictly in arrival order. Callers get a
synchronous acknowledgement or an :class:`~edubot.core.Unavailable`
error once the ack deadline passes.
"""

from __future__ import annotations

import copy
import queue
import random
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from typing import Callable, List, Optional

from .core import (
    AttendanceSession,
    AuditEvent,
    BotInstance,
    CheckIn,
    Conflict,
    EngineFault,
    FeedbackResponse,
    FeedbackSession,
    Group,
    InvalidInput,
    NotFound,
    Outcome,
    Question,
    ResponseType,
    SATISFACTION_LABELS,
    SessionState,
    SurveyDefinition,
    SurveyKind,
    SurveyResponse,
    SurveyState,
    Unavailable,
    aggregate_survey,
    validate_attendance_code,
)
from .gateway import (
    ActionAck,
    Button,
    ButtonClick,
    ChatGateway,
    DeleteMessages,
    DirectMessage,
    EditMessage,
    FetchPresence,
    GiveRole,
    MemberPresenceChange,
    Ping,
    SendDM,
    SendMessage,
)

#: Seconds of member inactivity after which a question dialog is dropped.
DIALOG_EXPIRY_S = 15 * 60

#: Seconds after a feedback click during which a DM is read as a comment.
COMMENT_WINDOW_S = 2 * 60

#: Minimum seconds between edits of a live tally message.
TALLY_THROTTLE_S = 1.0

#: Default synchronous acknowledgement deadline.
ACK_DEADLINE_S = 2.0


# ---------------------------------------------------------------------------
# Commands (inputs from the API side)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Attendance:
    name = "attendance"
    group_id: str
    status: str
    code: Optional[str] = None


@dataclass(frozen=True)
class CreateSimpleSurvey:
    name = "survey_simple"
    title: str
    prompt: str
    channel_id: str
    options: tuple = ()
    duration_s: Optional[int] = None


@dataclass(frozen=True)
class CreateComplexSurvey:
    name = "survey_complex"
    title: str
    channel_id: str
    questions: tuple = ()
    duration_s: Optional[int] = None


@dataclass(frozen=True)
class StartFeedback:
    name = "feedback"
    label: str
    channel_id: str


@dataclass(frozen=True)
class PingChat:
    name = "ping"


@dataclass(frozen=True)
class PostMessage:
    name = "send_message"
    channel_id: str
    text: str


@dataclass(frozen=True)
class AssignRole:
    name = "give_role"
    member_id: str
    role: str


@dataclass(frozen=True)
class ClearMessages:
    name = "clear_messages"
    channel_id: str
    limit: int


@dataclass(frozen=True)
class GetPresence:
    name = "presence"


@dataclass(frozen=True)
class ListSessions:
    name = "list_sessions"


@dataclass(frozen=True)
class GetSession:
    name = "get_session"
    session_id: str


@dataclass(frozen=True)
class ListSurveys:
    name = "list_surveys"


@dataclass(frozen=True)
class SurveyResults:
    name = "survey_results"
    survey_id: str


@dataclass(frozen=True)
class ListFeedback:
    name = "list_feedback"


@dataclass(frozen=True)
class FeedbackResults:
    name = "feedback_results"
    feedback_id: str


@dataclass(frozen=True)
class Snapshot:
    name = "snapshot"


@dataclass(frozen=True)
class Sweep:
    name = "sweep"


@dataclass(frozen=True)
class CommandResult:
    message: str
    data: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Engine context and state
# ---------------------------------------------------------------------------

@dataclass
class EngineContext:
    """Everything the engine needs from the outside world."""

    bot: BotInstance
    gateway: ChatGateway
    clock: Callable[[], datetime]
    rng: random.Random
    audit: Optional[Callable[[AuditEvent], None]] = None
    on_attendance_closed: Optional[Callable[[AttendanceSession], None]] = None
    on_survey_closed: Optional[Callable[[SurveyDefinition, list], None]] = None
    # Names here make the matching command raise; "slow:<name>" stalls it
    # past the ack deadline instead. Shared with the service for tests.
    fault_commands: set = field(default_factory=set)


@dataclass
class _Dialog:
    survey_id: str
    member_id: str
    next_index: int
    started_at: datetime
    last_activity: datetime


class Engine:
    """State machines for attendance, surveys and feedback of one bot.

    Not thread-safe on its own; always drive it through one thread (see
    :class:`EngineHandle`).
    """

    def __init__(self, ctx: EngineContext, groups: Optional[List[Group]] = None):
        self.ctx = ctx
        self.groups: dict = {g.id: g for g in (groups or [])}
        self.sessions: dict = {}
        self.surveys: dict = {}
        self.responses: dict = {}   # survey_id -> [SurveyResponse]
        self.feedback: dict = {}
        self.counters: dict = {"att": 0, "srv": 0, "fbk": 0}
        self._dialogs: dict = {}          # member_id -> _Dialog
        self._comment_windows: dict = {}  # member_id -> (feedback_id, deadline)
        self._tally_refs: dict = {}       # survey_id -> message_ref
        self._tally_last_edit: dict = {}  # survey_id -> datetime
        self._tally_dirty: set = set()

    # -- public entry points (called only from the worker thread) ----------

    def handle_command(self, cmd) -> CommandResult:
        now = self.ctx.clock()
        self.sweep(now)
        self._maybe_fault(cmd.name)
        handler = getattr(self, f"_cmd_{cmd.name}", None)
        if handler is None:
            raise EngineFault(f"no handler for command {cmd.name}")
        return handler(cmd, now)

    def handle_event(self, event) -> None:
        now = self.ctx.clock()
        self.sweep(now)
        if isinstance(event, DirectMessage):
            self._on_dm(event)
        elif isinstance(event, ButtonClick):
            self._on_click(event)
        elif isinstance(event, MemberPresenceChange):
            pass  # presence is read on demand, not tracked
        else:
            raise EngineFault(f"unknown event {type(event).__name__}")

    def sweep(self, now: datetime) -> None:
        """Apply every time-driven change that is due at ``now``.

        Idempotent: calling again with the same instant changes nothing.
        """
        for survey in list(self.surveys.values()):
            if survey.due(now):
                self._close_survey(survey, now)
        for member_id, dialog in list(self._dialogs.items()):
            if (now - dialog.last_activity).total_seconds() >= DIALOG_EXPIRY_S:
                del self._dialogs[member_id]
                self._audit(now, member_id, "dialog_expired",
                            {"survey_id": dialog.survey_id,
                             "answered": dialog.next_index},
                            Outcome.SUCCESS, "dropped after inactivity")
        for member_id, (_, deadline) in list(self._comment_windows.items()):
            if now >= deadline:
                del self._comment_windows[member_id]
        for survey_id in list(self._tally_dirty):
            survey = self.surveys.get(survey_id)
            if survey is None or survey.state is not SurveyState.OPEN:
                self._tally_dirty.discard(survey_id)
                continue
            if self._tally_throttled(survey_id, now):
                continue
            self._edit_tally(survey, now)

    def snapshot(self) -> dict:
        """A deep, JSON-ready copy of all durable state."""
        return copy.deepcopy({
            "bot": self.ctx.bot.to_record(),
            "groups": [g.to_record() for g in self.groups.values()],
            "sessions": [s.to_record() for s in self.sessions.values()],
            "surveys": [s.to_record() for s in self.surveys.values()],
            "responses": {
                sid: [r.to_record() for r in rs]
                for sid, rs in self.responses.items()
            },
            "feedback": [f.to_record() for f in self.feedback.values()],
            "counters": dict(self.counters),
        })

    def restore(self, snap: dict) -> None:
        self.groups = {g["id"]: Group.from_record(g) for g in snap["groups"]}
        self.sessions = {
            s["id"]: AttendanceSession.from_record(s) for s in snap["sessions"]
        }
        self.surveys = {
            s["id"]: SurveyDefinition.from_record(s) for s in snap["surveys"]
        }
        self.responses = {
            sid: [SurveyResponse.from_record(r) for r in rs]
            for sid, rs in snap["responses"].items()
        }
        self.feedback = {
            f["id"]: FeedbackSession.from_record(f) for f in snap["feedback"]
        }
        self.counters = dict(snap["counters"])

    # -- command handlers ---------------------------------------------------

    def _cmd_attendance(self, cmd: Attendance, now: datetime) -> CommandResult:
        group = self.groups.get(cmd.group_id)
        if group is None:
            raise NotFound(f"unknown group {cmd.group_id!r}")
        if cmd.status == "start":
            for s in self.sessions.values():
                if s.group_id == group.id and s.state is SessionState.OPEN:
                    raise Conflict(f"group {group.id} already has open session {s.id}")
            if cmd.code is None:
                code = f"{self.ctx.rng.randint(0, 9999):04d}"
            else:
                if not validate_attendance_code(cmd.code):
                    raise InvalidInput(f"attendance code {cmd.code!r} must be 4 digits")
                code = cmd.code
            session_id = self._next_id("att")
            session = AttendanceSession(id=session_id, group_id=group.id,
                                        code=code, opened_at=now)
            self.sessions[session_id] = session
            self._execute(SendMessage(
                channel_id=group.channel_id,
                text=(f"Attendance is open for group {group.id}. "
                      "DM me the 4-digit code shown in class to check in."),
            ))
            return CommandResult(
                message=(f"Attendance command executed: session {session_id} "
                         f"opened for group {group.id}"),
                data={"session_id": session_id, "group_id": group.id,
                      "code": code, "state": session.state.value},
            )
        if cmd.status == "stop":
            session = None
            for s in self.sessions.values():
                if s.group_id == group.id and s.state is SessionState.OPEN:
                    session = s
                    break
            if session is None:
                raise NotFound(f"group {group.id} has no open attendance session")
            session.close(now)
            if self.ctx.on_attendance_closed is not None:
                self.ctx.on_attendance_closed(session)
            self._execute(SendMessage(
                channel_id=group.channel_id,
                text=(f"Attendance for group {group.id} is closed. "
                      f"{session.present_count} checked in."),
            ))
            return CommandResult(
                message=(f"Attendance command executed: session {session.id} "
                         f"closed with {session.present_count} present"),
                data={"session_id": session.id, "group_id": group.id,
                      "present_count": session.present_count,
                      "state": session.state.value},
            )
        raise InvalidInput(f"status must be start or stop, not {cmd.status!r}")

    def _cmd_survey_simple(self, cmd: CreateSimpleSurvey, now: datetime) -> CommandResult:
        question = Question(index=0, prompt=cmd.prompt,
                            response_type=ResponseType.FIVE_LEVEL,
                            options=tuple(cmd.options))
        survey_id = self._next_id("srv")
        survey = SurveyDefinition(
            id=survey_id, kind=SurveyKind.SIMPLE, title=cmd.title,
            channel_id=cmd.channel_id, questions=[question],
            duration_s=cmd.duration_s, state=SurveyState.OPEN, opened_at=now,
        )
        buttons = tuple(
            Button(custom_id=f"vote:{survey_id}:{level}", label=label)
            for level, label in enumerate(question.options, start=1)
        )
        ack = self._execute(SendMessage(
            channel_id=cmd.channel_id,
            text=self._tally_text(survey, []),
            buttons=buttons,
        ))
        self.surveys[survey_id] = survey
        self.responses[survey_id] = []
        self._tally_refs[survey_id] = ack.message_ref
        self._tally_last_edit[survey_id] = now
        return CommandResult(
            message=f"Survey {survey_id} is open",
            data={"survey_id": survey_id, "kind": survey.kind.value,
                  "message_ref": ack.message_ref},
        )

    def _cmd_survey_complex(self, cmd: CreateComplexSurvey, now: datetime) -> CommandResult:
        questions = [
            Question(index=i, prompt=q["prompt"],
                     response_type=ResponseType(q["response_type"]),
                     options=tuple(q.get("options", ())))
            for i, q in enumerate(cmd.questions)
        ]
        survey_id = self._next_id("srv")
        survey = SurveyDefinition(
            id=survey_id, kind=SurveyKind.COMPLEX, title=cmd.title,
            channel_id=cmd.channel_id, questions=questions,
            duration_s=cmd.duration_s, state=SurveyState.OPEN, opened_at=now,
        )
        ack = self._execute(SendMessage(
            channel_id=cmd.channel_id,
            text=(f"Survey '{cmd.title}': {len(questions)} question(s). "
                  "Press Participate and I will DM you."),
            buttons=(Button(custom_id=f"join:{survey_id}", label="Participate"),),
        ))
        self.surveys[survey_id] = survey
        self.responses[survey_id] = []
        return CommandResult(
            message=f"Survey {survey_id} is open",
            data={"survey_id": survey_id, "kind": survey.kind.value,
                  "message_ref": ack.message_ref},
        )

    def _cmd_feedback(self, cmd: StartFeedback, now: datetime) -> CommandResult:
        feedback_id = self._next_id("fbk")
        fb = FeedbackSession(id=feedback_id, channel_id=cmd.channel_id,
                             label=cmd.label)
        buttons = tuple(
            Button(custom_id=f"fbk:{feedback_id}:{level}", label=label)
            for level, label in enumerate(SATISFACTION_LABELS, start=1)
        )
        self._execute(SendMessage(
            channel_id=cmd.channel_id,
            text=(f"How satisfied are you with {cmd.label}? Click a button; "
                  "you may DM an optional comment within 2 minutes."),
            buttons=buttons,
        ))
        self.feedback[feedback_id] = fb
        return CommandResult(
            message=f"Feedback round {feedback_id} is open",
            data={"feedback_id": feedback_id},
        )

    def _cmd_ping(self, cmd: PingChat, now: datetime) -> CommandResult:
        ack = self._execute(Ping())
        return CommandResult(message="Pong", data={"latency_ms": ack.latency_ms})

    def _cmd_send_message(self, cmd: PostMessage, now: datetime) -> CommandResult:
        if not cmd.text:
            raise InvalidInput("message text must be non-empty")
        ack = self._execute(SendMessage(channel_id=cmd.channel_id, text=cmd.text))
        return CommandResult(message="Message sent",
                             data={"message_ref": ack.message_ref})

    def _cmd_give_role(self, cmd: AssignRole, now: datetime) -> CommandResult:
        if not cmd.role:
            raise InvalidInput("role must be non-empty")
        self._execute(GiveRole(member_id=cmd.member_id, role=cmd.role))
        return CommandResult(
            message=f"Role {cmd.role} given to {cmd.member_id}",
            data={"member_id": cmd.member_id, "role": cmd.role},
        )

    def _cmd_clear_messages(self, cmd: ClearMessages, now: datetime) -> CommandResult:
        if cmd.limit <= 0:
            raise InvalidInput("limit must be a positive integer")
        ack = self._execute(DeleteMessages(channel_id=cmd.channel_id,
                                           limit=cmd.limit))
        return CommandResult(message=f"Deleted {ack.deleted} message(s)",
                             data={"deleted": ack.deleted})

    def _cmd_presence(self, cmd: GetPresence, now: datetime) -> CommandResult:
        ack = self._execute(FetchPresence(guild_id=self.ctx.bot.guild_id))
        return CommandResult(message="Presence fetched", data=dict(ack.presence))

    # -- query handlers -----------------------------------------------------

    def _cmd_list_sessions(self, cmd: ListSessions, now: datetime) -> CommandResult:
        sessions = [self._session_summary(s) for s in self.sessions.values()]
        return CommandResult(message="Sessions listed", data={"sessions": sessions})

    def _cmd_get_session(self, cmd: GetSession, now: datetime) -> CommandResult:
        session = self.sessions.get(cmd.session_id)
        if session is None:
            raise NotFound(f"unknown attendance session {cmd.session_id!r}")
        data = self._session_summary(session)
        data["checkins"] = [c.to_record() for c in session.checkins]
        return CommandResult(message="Session fetched", data=data)

    def _cmd_list_surveys(self, cmd: ListSurveys, now: datetime) -> CommandResult:
        surveys = [{
            "survey_id": s.id, "kind": s.kind.value, "title": s.title,
            "state": s.state.value, "question_count": len(s.questions),
            "responses": len(self.responses.get(s.id, [])),
        } for s in self.surveys.values()]
        return CommandResult(message="Surveys listed", data={"surveys": surveys})

    def _cmd_survey_results(self, cmd: SurveyResults, now: datetime) -> CommandResult:
        survey = self.surveys.get(cmd.survey_id)
        if survey is None:
            raise NotFound(f"unknown survey {cmd.survey_id!r}")
        responses = self.responses.get(survey.id, [])
        questions = []
        for q in survey.questions:
            subset = [r for r in responses if r.question_index == q.index]
            hist = aggregate_survey(subset, q)
            questions.append({
                "index": q.index, "prompt": q.prompt,
                "response_type": q.response_type.value,
                "histogram": hist.to_record(),
            })
        participants = len({r.student_id for r in responses})
        return CommandResult(message="Results computed", data={
            "survey_id": survey.id, "title": survey.title,
            "kind": survey.kind.value, "state": survey.state.value,
            "participants": participants, "questions": questions,
        })

    def _cmd_list_feedback(self, cmd: ListFeedback, now: datetime) -> CommandResult:
        rounds = [{
            "feedback_id": f.id, "label": f.label, "state": f.state.value,
            "responses": len(f.responses),
        } for f in self.feedback.values()]
        return CommandResult(message="Feedback rounds listed", data={"rounds": rounds})

    def _cmd_feedback_results(self, cmd: FeedbackResults, now: datetime) -> CommandResult:
        fb = self.feedback.get(cmd.feedback_id)
        if fb is None:
            raise NotFound(f"unknown feedback round {cmd.feedback_id!r}")
        counts = [0] * 5
        comments = []
        for r in fb.responses:
            counts[r.level - 1] += 1
            if r.comment:
                comments.append({"student_id": r.student_id, "comment": r.comment})
        return CommandResult(message="Results computed", data={
            "feedback_id": fb.id, "label": fb.label, "state": fb.state.value,
            "total": len(fb.responses),
            "histogram": {
                "buckets": [{"label": label, "count": counts[i]}
                            for i, label in enumerate(SATISFACTION_LABELS)],
                "total": len(fb.responses),
            },
            "comments": comments,
        })

    def _cmd_snapshot(self, cmd: Snapshot, now: datetime) -> CommandResult:
        return CommandResult(message="Snapshot taken", data=self.snapshot())

    def _cmd_sweep(self, cmd: Sweep, now: datetime) -> CommandResult:
        # handle_command already swept before dispatching here
        return CommandResult(message="Swept")

    # -- chat event handlers ------------------------------------------------

    def _on_dm(self, event: DirectMessage) -> None:
        now = event.at
        member = event.member_id
        text = event.text.strip()

        dialog = self._dialogs.get(member)
        if dialog is not None:
            self._dialog_answer(dialog, text, now)
            return

        window = self._comment_windows.get(member)
        if window is not None:
            feedback_id, deadline = window
            if now < deadline:
                del self._comment_windows[member]
                self._attach_comment(feedback_id, member, event.text.strip(), now)
                return
            del self._comment_windows[member]

        open_sessions = [s for s in self.sessions.values()
                         if s.state is SessionState.OPEN]
        for session in open_sessions:
            if session.code != text:
                continue
            group = self.groups.get(session.group_id)
            roster = group.roster if group is not None else frozenset()
            if member not in roster:
                self._execute(SendDM(member_id=member,
                                     text="You are not on the roster for this session."))
                self._audit(now, member, "checkin_rejected",
                            {"session_id": session.id}, Outcome.ERROR,
                            "not on roster")
                return
            added = session.add_checkin(CheckIn(
                student_id=member,
                display_name=event.display_name or member,
                at=now,
            ))
            if added:
                self._execute(SendDM(member_id=member,
                                     text=f"Check-in recorded for group {group.id}."))
                self._audit(now, member, "checkin",
                            {"session_id": session.id}, Outcome.SUCCESS)
            else:
                self._execute(SendDM(member_id=member,
                                     text=f"You are already checked in for group {group.id}."))
                self._audit(now, member, "checkin_duplicate",
                            {"session_id": session.id}, Outcome.ERROR,
                            "already recorded")
            return

        if validate_attendance_code(text) or open_sessions:
            self._execute(SendDM(
                member_id=member,
                text="That code does not match any open attendance session.",
            ))
            self._audit(now, member, "checkin_rejected", {"text": text},
                        Outcome.ERROR, "wrong or expired code")
            return

        self._audit(now, member, "dm_ignored", {"text": text}, Outcome.ERROR,
                    "no active interaction")

    def _on_click(self, event: ButtonClick) -> None:
        now = event.at
        parts = event.custom_id.split(":")
        if parts[0] == "vote" and len(parts) == 3:
            self._vote(event.member_id, parts[1], parts[2], now)
        elif parts[0] == "join" and len(parts) == 2:
            self._join(event.member_id, parts[1], now)
        elif parts[0] == "fbk" and len(parts) == 3:
            self._feedback_click(event.member_id, parts[1], parts[2], now)
        else:
            self._audit(now, event.member_id, "click_ignored",
                        {"custom_id": event.custom_id}, Outcome.ERROR,
                        "unknown button")

    # -- simple survey votes ------------------------------------------------

    def _vote(self, member: str, survey_id: str, raw_level: str, now: datetime) -> None:
        survey = self.surveys.get(survey_id)
        if survey is None or survey.state is not SurveyState.OPEN:
            self._audit(now, member, "vote_rejected", {"survey_id": survey_id},
                        Outcome.ERROR, "survey not open")
            return
        if raw_level not in {"1", "2", "3", "4", "5"}:
            self._audit(now, member, "click_ignored",
                        {"survey_id": survey_id, "level": raw_level},
                        Outcome.ERROR, "level out of range")
            return
        level = int(raw_level)
        response = SurveyResponse(
            survey_id=survey_id, question_index=0, student_id=member,
            response_type=ResponseType.FIVE_LEVEL, value=level, at=now,
        )
        replaced = self._store_response(response)
        action = "vote_overwrite" if replaced else "vote"
        self._audit(now, member, action,
                    {"survey_id": survey_id, "level": level}, Outcome.SUCCESS)
        self._tally_dirty.add(survey_id)
        if not self._tally_throttled(survey_id, now):
            self._edit_tally(survey, now)

    def _tally_throttled(self, survey_id: str, now: datetime) -> bool:
        last = self._tally_last_edit.get(survey_id)
        return last is not None and (now - last).total_seconds() < TALLY_THROTTLE_S

    def _edit_tally(self, survey: SurveyDefinition, now: datetime) -> None:
        ref = self._tally_refs.get(survey.id)
        if ref is None:
            return
        responses = self.responses.get(survey.id, [])
        self._execute(EditMessage(channel_id=survey.channel_id, message_ref=ref,
                                  text=self._tally_text(survey, responses)))
        self._tally_last_edit[survey.id] = now
        self._tally_dirty.discard(survey.id)

    @staticmethod
    def _tally_text(survey: SurveyDefinition, responses: list) -> str:
        question = survey.questions[0]
        hist = aggregate_survey(responses, question)
        lines = [f"Survey '{survey.title}': {question.prompt}"]
        lines.extend(f"{b.label}: {b.count}" for b in hist.buckets)
        lines.append(f"Total votes: {hist.total}")
        return "\n".join(lines)

    # -- complex survey dialogs ----------------------------------------------

    def _join(self, member: str, survey_id: str, now: datetime) -> None:
        survey = self.surveys.get(survey_id)
        if survey is None or survey.state is not SurveyState.OPEN:
            self._audit(now, member, "join_rejected", {"survey_id": survey_id},
                        Outcome.ERROR, "survey not open")
            return
        current = self._dialogs.get(member)
        if current is not None:
            if current.survey_id == survey_id:
                self._audit(now, member, "join_duplicate",
                            {"survey_id": survey_id}, Outcome.ERROR,
                            "dialog already running")
            else:
                self._execute(SendDM(
                    member_id=member,
                    text="Please finish your current survey before joining another.",
                ))
                self._audit(now, member, "join_rejected",
                            {"survey_id": survey_id}, Outcome.ERROR,
                            "another dialog running")
            return
        dialog = _Dialog(survey_id=survey_id, member_id=member, next_index=0,
                         started_at=now, last_activity=now)
        self._dialogs[member] = dialog
        self._audit(now, member, "dialog_started", {"survey_id": survey_id},
                    Outcome.SUCCESS)
        self._send_question(survey, dialog)

    def _send_question(self, survey: SurveyDefinition, dialog: _Dialog) -> None:
        question = survey.questions[dialog.next_index]
        hint = {
            ResponseType.FIVE_LEVEL: "reply with a number 1-5",
            ResponseType.PERCENTAGE: "reply with a number 0-100",
            ResponseType.FREE_TEXT: "reply with a short text",
        }[question.response_type]
        if question.response_type is ResponseType.FIVE_LEVEL:
            scale = ", ".join(f"{i}={label}"
                              for i, label in enumerate(question.options, start=1))
            hint = f"{hint}: {scale}"
        self._execute(SendDM(
            member_id=dialog.member_id,
            text=(f"Q{dialog.next_index + 1}/{len(survey.questions)}: "
                  f"{question.prompt} ({hint})"),
        ))

    def _dialog_answer(self, dialog: _Dialog, text: str, now: datetime) -> None:
        member = dialog.member_id
        survey = self.surveys.get(dialog.survey_id)
        if survey is None or survey.state is not SurveyState.OPEN:
            del self._dialogs[member]
            self._audit(now, member, "dialog_cancelled",
                        {"survey_id": dialog.survey_id}, Outcome.ERROR,
                        "survey closed mid-dialog")
            return
        question = survey.questions[dialog.next_index]
        value = _parse_answer(question, text)
        if value is None:
            self._send_question(survey, dialog)
            dialog.last_activity = now
            self._audit(now, member, "answer_invalid",
                        {"survey_id": survey.id, "question": question.index},
                        Outcome.ERROR, f"could not parse {text!r}")
            return
        response = SurveyResponse(
            survey_id=survey.id, question_index=question.index,
            student_id=member, response_type=question.response_type,
            value=value, at=now,
        )
        replaced = self._store_response(response)
        action = "answer_overwrite" if replaced else "answer"
        self._audit(now, member, action,
                    {"survey_id": survey.id, "question": question.index},
                    Outcome.SUCCESS)
        dialog.next_index += 1
        dialog.last_activity = now
        if dialog.next_index < len(survey.questions):
            self._send_question(survey, dialog)
        else:
            del self._dialogs[member]
            self._execute(SendDM(
                member_id=member,
                text=f"All done. Thanks for participating in '{survey.title}'.",
            ))
            self._audit(now, member, "dialog_completed",
                        {"survey_id": survey.id}, Outcome.SUCCESS)

    def _store_response(self, response: SurveyResponse) -> bool:
        """Append or, for a repeat (student, question) pair, replace.
        Arrival order is authoritative: the later answer wins."""
        bucket = self.responses.setdefault(response.survey_id, [])
        for i, existing in enumerate(bucket):
            if (existing.student_id == response.student_id
                    and existing.question_index == response.question_index):
                bucket[i] = response
                return True
        bucket.append(response)
        return False

    # -- feedback -------------------------------------------------------------

    def _feedback_click(self, member: str, feedback_id: str, raw_level: str,
                        now: datetime) -> None:
        fb = self.feedback.get(feedback_id)
        if fb is None or fb.state is not SessionState.OPEN:
            self._audit(now, member, "feedback_rejected",
                        {"feedback_id": feedback_id}, Outcome.ERROR,
                        "feedback round not open")
            return
        if raw_level not in {"1", "2", "3", "4", "5"}:
            self._audit(now, member, "click_ignored",
                        {"feedback_id": feedback_id, "level": raw_level},
                        Outcome.ERROR, "level out of range")
            return
        level = int(raw_level)
        replaced = fb.record(FeedbackResponse(student_id=member, level=level, at=now))
        action = "feedback_overwrite" if replaced else "feedback"
        self._audit(now, member, action,
                    {"feedback_id": feedback_id, "level": level}, Outcome.SUCCESS)
        # echo the running aggregate straight back to the respondent
        counts = [0] * 5
        for r in fb.responses:
            counts[r.level - 1] += 1
        summary = ", ".join(f"{label}: {counts[i]}"
                            for i, label in enumerate(SATISFACTION_LABELS))
        self._execute(SendDM(
            member_id=member,
            text=(f"Current results for {fb.label}: {summary} "
                  f"({len(fb.responses)} responses)."),
        ))
        self._comment_windows[member] = (
            feedback_id, now + timedelta(seconds=COMMENT_WINDOW_S)
        )

    def _attach_comment(self, feedback_id: str, member: str, comment: str,
                        now: datetime) -> None:
        fb = self.feedback.get(feedback_id)
        if fb is None:
            return
        response = fb.response_of(member)
        if response is None:
            return
        response.comment = comment
        self._audit(now, member, "feedback_comment",
                    {"feedback_id": feedback_id}, Outcome.SUCCESS)

    # -- shared helpers -------------------------------------------------------

    def _close_survey(self, survey: SurveyDefinition, now: datetime) -> None:
        survey.state = SurveyState.CLOSED
        survey.closed_at = now
        if survey.kind is SurveyKind.SIMPLE:
            self._edit_tally(survey, now)
        for member_id, dialog in list(self._dialogs.items()):
            if dialog.survey_id == survey.id:
                del self._dialogs[member_id]
                self._audit(now, member_id, "dialog_cancelled",
                            {"survey_id": survey.id}, Outcome.ERROR,
                            "survey closed mid-dialog")
        self._execute(SendMessage(
            channel_id=survey.channel_id,
            text=f"Survey '{survey.title}' is closed.",
        ))
        if self.ctx.on_survey_closed is not None:
            self.ctx.on_survey_closed(survey, list(self.responses.get(survey.id, [])))
        self._audit(now, "system", "survey_closed", {"survey_id": survey.id},
                    Outcome.SUCCESS)

    def _session_summary(self, session: AttendanceSession) -> dict:
        rec = session.to_record()
        del rec["checkins"]
        rec["session_id"] = rec.pop("id")
        rec["present_count"] = session.present_count
        return rec

    def _next_id(self, kind: str) -> str:
        self.counters[kind] += 1
        return f"{self.ctx.bot.id}-{kind}-{self.counters[kind]}"

    def _execute(self, action) -> ActionAck:
        ack = self.ctx.gateway.execute(self.ctx.bot.id, action)
        if not ack.ok:
            raise EngineFault(f"chat action failed: {ack.error}")
        return ack

    def _maybe_fault(self, name: str) -> None:
        if f"slow:{name}" in self.ctx.fault_commands:
            time.sleep(ACK_DEADLINE_S + 0.5)
        if name in self.ctx.fault_commands:
            raise EngineFault(f"injected fault for {name}")

    def _audit(self, ts: datetime, actor: str, action: str, params: dict,
               outcome: Outcome, detail: str = "") -> None:
        if self.ctx.audit is None:
            return
        self.ctx.audit(AuditEvent(ts=ts, actor=actor, action=action,
                                  params=params, outcome=outcome, detail=detail))


def _parse_answer(question: Question, text: str):
    """Turn a DM into a typed answer, or None when it cannot be read."""
    text = text.strip()
    if question.response_type is ResponseType.FIVE_LEVEL:
        if text in {"1", "2", "3", "4", "5"}:
            return int(text)
        folded = text.casefold()
        for i, label in enumerate(question.options, start=1):
            if label.casefold() == folded:
                return i
        return None
    if question.response_type is ResponseType.PERCENTAGE:
        raw = text[:-1].strip() if text.endswith("%") else text
        try:
            value = int(raw)
        except ValueError:
            return None
        return value if 0 <= value <= 100 else None
    return text if text else None


# ---------------------------------------------------------------------------
# Worker thread wrapper
# ---------------------------------------------------------------------------

class _Stop:
    pass


@dataclass
class _WorkItem:
    kind: str  # "command" | "event"
    payload: object
    done: threading.Event = field(default_factory=threading.Event)
    result: Optional[CommandResult] = None
    error: Optional[BaseException] = None


class EngineHandle:
    """Single worker thread in front of an :class:`Engine`.

    ``submit`` blocks until the engine acknowledges or the deadline
    passes; past the deadline the caller gets
    :class:`~edubot.core.Unavailable` while the engine finishes (or
    fails) in the background.
    """

    def __init__(self, engine: Engine, ack_deadline_s: float = ACK_DEADLINE_S,
                 idle_sweep_s: Optional[float] = 0.2):
        # idle_sweep_s None turns background sweeping off: time-driven
        # changes then happen only when a command or event arrives, which
        # keeps scripted replays fully step-driven.
        self.engine = engine
        self._ack_deadline_s = ack_deadline_s
        self._idle_sweep_s = idle_sweep_s
        self._queue: queue.Queue = queue.Queue()
        self._thread = threading.Thread(
            target=self._run, name=f"engine-{engine.ctx.bot.id}", daemon=True
        )
        self._thread.start()

    def submit(self, cmd, timeout: Optional[float] = None) -> CommandResult:
        item = _WorkItem(kind="command", payload=cmd)
        self._queue.put(item)
        if not item.done.wait(timeout if timeout is not None else self._ack_deadline_s):
            raise Unavailable("engine did not acknowledge before the deadline")
        if item.error is not None:
            raise item.error
        assert item.result is not None
        return item.result

    def submit_event(self, event, timeout: float = 30.0) -> None:
        item = _WorkItem(kind="event", payload=event)
        self._queue.put(item)
        if not item.done.wait(timeout):
            raise Unavailable("engine did not process the event in time")
        if item.error is not None:
            raise item.error

    def on_event(self, event) -> None:
        """Gateway subscription callback; errors never escape to chat."""
        try:
            self.submit_event(event)
        except Exception:
            pass

    def stop(self) -> None:
        self._queue.put(_Stop())
        self._thread.join(timeout=5.0)

    def _run(self) -> None:
        while True:
            try:
                item = self._queue.get(timeout=self._idle_sweep_s)
            except queue.Empty:
                try:
                    self.engine.sweep(self.engine.ctx.clock())
                except Exception:
                    pass
                continue
            if isinstance(item, _Stop):
                return
            try:
                if item.kind == "command":
                    item.result = self.engine.handle_command(item.payload)
                else:
                    self.engine.handle_event(item.payload)
            except BaseException as exc:
                item.error = exc
            finally:
                item.done.set()
