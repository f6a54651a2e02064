"""Domain types and pure operations shared by the engine, API and persistence.

Everything in this module is I/O-free. Values are safe to copy across
threads; all timestamps are timezone-aware UTC.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from enum import Enum
from typing import Mapping, Optional, Sequence, Union


# ---------------------------------------------------------------------------
# Errors
# ---------------------------------------------------------------------------

class EduBotError(Exception):
    """Base class for all domain-level errors."""


class InvalidInput(EduBotError):
    """A value violates a domain invariant or a request is malformed."""


class NotFound(EduBotError):
    """A referenced entity (group, session, survey, member...) does not exist."""


class Conflict(EduBotError):
    """The requested change collides with current state (e.g. a second
    open attendance session for the same group)."""


class Unavailable(EduBotError):
    """The chat gateway or engine did not respond in time; safe to retry."""


class EngineFault(EduBotError):
    """Internal engine failure."""


# ---------------------------------------------------------------------------
# Small helpers
# ---------------------------------------------------------------------------

def utcnow() -> datetime:
    return datetime.now(timezone.utc)


def isoformat(ts: datetime) -> str:
    if ts.tzinfo is None:
        raise InvalidInput("naive timestamps are not allowed")
    return ts.astimezone(timezone.utc).isoformat()


def parse_ts(value: str) -> datetime:
    ts = datetime.fromisoformat(value.replace("Z", "+00:00"))
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


# ---------------------------------------------------------------------------
# Enums
# ---------------------------------------------------------------------------

class BotMode(str, Enum):
    DEVELOPMENT = "development"
    PRODUCTION = "production"


class BotState(str, Enum):
    STOPPED = "stopped"
    STARTING = "starting"
    RUNNING = "running"
    ERROR = "error"


# Legal bot lifecycle edges; anything may drop into ERROR.
_BOT_TRANSITIONS = {
    BotState.STOPPED: {BotState.STARTING},
    BotState.STARTING: {BotState.RUNNING, BotState.STOPPED},
    BotState.RUNNING: {BotState.STOPPED},
    BotState.ERROR: {BotState.STOPPED},
}


class SessionState(str, Enum):
    OPEN = "open"
    CLOSED = "closed"


class SurveyKind(str, Enum):
    SIMPLE = "simple"
    COMPLEX = "complex"


class SurveyState(str, Enum):
    DRAFT = "draft"
    OPEN = "open"
    CLOSED = "closed"


class ResponseType(str, Enum):
    FIVE_LEVEL = "five_level"
    PERCENTAGE = "percentage"
    FREE_TEXT = "free_text"


class Outcome(str, Enum):
    SUCCESS = "success"
    ERROR = "error"


#: Default verbal difficulty labels for five-level questions.
FIVE_LEVEL_LABELS = ("Very Easy", "Easy", "Moderate", "Hard", "Very Hard")

#: Labels for the five-level satisfaction feedback dialog.
SATISFACTION_LABELS = (
    "Very Dissatisfied",
    "Dissatisfied",
    "Neutral",
    "Satisfied",
    "Very Satisfied",
)


# ---------------------------------------------------------------------------
# Bot instance & groups
# ---------------------------------------------------------------------------

@dataclass
class BotInstance:
    """One managed bot: its identity, mode and lifecycle state.

    ``token_ref`` names an entry in the secrets store and must never leak
    into API responses, audit events or the persisted registry.
    """

    id: str
    name: str
    token_ref: str
    guild_id: str
    mode: BotMode = BotMode.DEVELOPMENT
    state: BotState = BotState.STOPPED
    created_at: datetime = field(default_factory=utcnow)

    def transition(self, new_state: BotState) -> None:
        if new_state is BotState.ERROR:
            self.state = new_state
            return
        if new_state not in _BOT_TRANSITIONS[self.state]:
            raise Conflict(
                f"bot {self.id}: illegal state change {self.state.value} -> {new_state.value}"
            )
        self.state = new_state

    @staticmethod
    def token_ref_for(bot_id: str) -> str:
        return f"bot:{bot_id}:token"

    def to_record(self) -> dict:
        # token_ref deliberately elided; it is reconstructed by convention.
        return {
            "id": self.id,
            "name": self.name,
            "guild_id": self.guild_id,
            "mode": self.mode.value,
            "state": self.state.value,
            "created_at": isoformat(self.created_at),
        }

    @classmethod
    def from_record(cls, rec: Mapping) -> "BotInstance":
        return cls(
            id=rec["id"],
            name=rec["name"],
            token_ref=cls.token_ref_for(rec["id"]),
            guild_id=rec["guild_id"],
            mode=BotMode(rec["mode"]),
            state=BotState(rec["state"]),
            created_at=parse_ts(rec["created_at"]),
        )


@dataclass
class Group:
    """A named roster tied to one chat channel, unique within a bot."""

    id: str
    channel_id: str
    roster: frozenset = frozenset()

    def __post_init__(self) -> None:
        if not self.id:
            raise InvalidInput("group id must be non-empty")
        self.roster = frozenset(self.roster)

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "channel_id": self.channel_id,
            "roster": sorted(self.roster),
        }

    @classmethod
    def from_record(cls, rec: Mapping) -> "Group":
        return cls(id=rec["id"], channel_id=rec["channel_id"], roster=frozenset(rec["roster"]))


# ---------------------------------------------------------------------------
# Attendance
# ---------------------------------------------------------------------------

_CODE_RE = re.compile(r"[0-9]{4}")


def validate_attendance_code(code: str) -> bool:
    """True iff ``code`` is exactly four decimal digits."""
    return isinstance(code, str) and _CODE_RE.fullmatch(code) is not None


@dataclass
class CheckIn:
    student_id: str
    display_name: str
    at: datetime

    def __post_init__(self) -> None:
        if not self.student_id:
            raise InvalidInput("check-in student_id must be non-empty")

    def to_record(self) -> dict:
        return {
            "student_id": self.student_id,
            "display_name": self.display_name,
            "at": isoformat(self.at),
        }

    @classmethod
    def from_record(cls, rec: Mapping) -> "CheckIn":
        return cls(rec["student_id"], rec["display_name"], parse_ts(rec["at"]))


@dataclass
class AttendanceSession:
    """An open or closed attendance window with deduplicated check-ins."""

    id: str
    group_id: str
    code: str
    opened_at: datetime
    state: SessionState = SessionState.OPEN
    closed_at: Optional[datetime] = None
    checkins: list = field(default_factory=list)

    def __post_init__(self) -> None:
        if not validate_attendance_code(self.code):
            raise InvalidInput(f"attendance code {self.code!r} is not a 4-digit string")

    def has_student(self, student_id: str) -> bool:
        return any(c.student_id == student_id for c in self.checkins)

    def add_checkin(self, checkin: CheckIn) -> bool:
        """Record a check-in; returns False (unchanged) for duplicates."""
        if self.state is not SessionState.OPEN:
            raise Conflict(f"session {self.id} is closed")
        if checkin.at < self.opened_at:
            raise InvalidInput("check-in timestamp precedes session open")
        if self.has_student(checkin.student_id):
            return False
        self.checkins.append(checkin)
        return True

    def close(self, at: datetime) -> None:
        if self.state is not SessionState.OPEN:
            raise Conflict(f"session {self.id} already closed")
        if at < self.opened_at:
            raise InvalidInput("close timestamp precedes session open")
        self.state = SessionState.CLOSED
        self.closed_at = at

    @property
    def present_count(self) -> int:
        return len(self.checkins)

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "group_id": self.group_id,
            "code": self.code,
            "state": self.state.value,
            "opened_at": isoformat(self.opened_at),
            "closed_at": None if self.closed_at is None else isoformat(self.closed_at),
            "checkins": [c.to_record() for c in self.checkins],
        }

    @classmethod
    def from_record(cls, rec: Mapping) -> "AttendanceSession":
        return cls(
            id=rec["id"],
            group_id=rec["group_id"],
            code=rec["code"],
            opened_at=parse_ts(rec["opened_at"]),
            state=SessionState(rec["state"]),
            closed_at=None if rec["closed_at"] is None else parse_ts(rec["closed_at"]),
            checkins=[CheckIn.from_record(c) for c in rec["checkins"]],
        )


# ---------------------------------------------------------------------------
# Surveys
# ---------------------------------------------------------------------------

@dataclass
class Question:
    index: int
    prompt: str
    response_type: ResponseType
    options: tuple = ()

    def __post_init__(self) -> None:
        self.response_type = ResponseType(self.response_type)
        if self.response_type is ResponseType.FIVE_LEVEL:
            if not self.options:
                self.options = FIVE_LEVEL_LABELS
            if len(self.options) != 5:
                raise InvalidInput("five_level questions need exactly 5 option labels")
        elif self.options:
            raise InvalidInput(f"{self.response_type.value} questions take no options")
        self.options = tuple(self.options)

    def to_record(self) -> dict:
        return {
            "index": self.index,
            "prompt": self.prompt,
            "response_type": self.response_type.value,
            "options": list(self.options),
        }

    @classmethod
    def from_record(cls, rec: Mapping) -> "Question":
        return cls(
            index=rec["index"],
            prompt=rec["prompt"],
            response_type=ResponseType(rec["response_type"]),
            options=tuple(rec["options"]),
        )


@dataclass
class SurveyDefinition:
    id: str
    kind: SurveyKind
    title: str
    channel_id: str
    questions: list
    duration_s: Optional[int] = None
    state: SurveyState = SurveyState.DRAFT
    opened_at: Optional[datetime] = None
    closed_at: Optional[datetime] = None

    def __post_init__(self) -> None:
        self.kind = SurveyKind(self.kind)
        if not self.questions:
            raise InvalidInput("a survey needs at least one question")
        for expect, q in enumerate(self.questions):
            if q.index != expect:
                raise InvalidInput("question indexes must be contiguous from 0")
        if self.kind is SurveyKind.SIMPLE:
            if len(self.questions) != 1:
                raise InvalidInput("simple surveys have exactly one question")
            if self.questions[0].response_type is not ResponseType.FIVE_LEVEL:
                raise InvalidInput("simple surveys use the five_level response type")
        if self.duration_s is not None and self.duration_s <= 0:
            raise InvalidInput("survey duration must be positive")

    def question(self, index: int) -> Question:
        try:
            return self.questions[index]
        except IndexError:
            raise NotFound(f"survey {self.id} has no question {index}") from None

    def due(self, now: datetime) -> bool:
        """True when an open, time-limited survey has run out."""
        if self.state is not SurveyState.OPEN or self.duration_s is None:
            return False
        assert self.opened_at is not None
        return (now - self.opened_at).total_seconds() >= self.duration_s

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind.value,
            "title": self.title,
            "channel_id": self.channel_id,
            "questions": [q.to_record() for q in self.questions],
            "duration_s": self.duration_s,
            "state": self.state.value,
            "opened_at": None if self.opened_at is None else isoformat(self.opened_at),
            "closed_at": None if self.closed_at is None else isoformat(self.closed_at),
        }

    @classmethod
    def from_record(cls, rec: Mapping) -> "SurveyDefinition":
        return cls(
            id=rec["id"],
            kind=SurveyKind(rec["kind"]),
            title=rec["title"],
            channel_id=rec["channel_id"],
            questions=[Question.from_record(q) for q in rec["questions"]],
            duration_s=rec["duration_s"],
            state=SurveyState(rec["state"]),
            opened_at=None if rec["opened_at"] is None else parse_ts(rec["opened_at"]),
            closed_at=None if rec["closed_at"] is None else parse_ts(rec["closed_at"]),
        )


@dataclass
class SurveyResponse:
    """One student's answer to one survey question.

    ``value`` is an int for five_level (1..5) and percentage (0..100)
    answers, and a string for free_text.
    """

    survey_id: str
    question_index: int
    student_id: str
    response_type: ResponseType
    value: Union[int, str]
    at: datetime

    def __post_init__(self) -> None:
        self.response_type = ResponseType(self.response_type)
        if self.response_type is ResponseType.FIVE_LEVEL:
            if not isinstance(self.value, int) or not 1 <= self.value <= 5:
                raise InvalidInput("five_level answers are integers 1..5")
        elif self.response_type is ResponseType.PERCENTAGE:
            if not isinstance(self.value, int) or not 0 <= self.value <= 100:
                raise InvalidInput("percentage answers are integers 0..100")
        elif not isinstance(self.value, str):
            raise InvalidInput("free_text answers are strings")

    def to_record(self) -> dict:
        return {
            "survey_id": self.survey_id,
            "question_index": self.question_index,
            "student_id": self.student_id,
            "response_type": self.response_type.value,
            "value": self.value,
            "at": isoformat(self.at),
        }

    @classmethod
    def from_record(cls, rec: Mapping) -> "SurveyResponse":
        return cls(
            survey_id=rec["survey_id"],
            question_index=rec["question_index"],
            student_id=rec["student_id"],
            response_type=ResponseType(rec["response_type"]),
            value=rec["value"],
            at=parse_ts(rec["at"]),
        )


# ---------------------------------------------------------------------------
# Feedback
# ---------------------------------------------------------------------------

@dataclass
class FeedbackResponse:
    student_id: str
    level: int
    at: datetime
    comment: Optional[str] = None

    def __post_init__(self) -> None:
        if not 1 <= self.level <= 5:
            raise InvalidInput("feedback level must be within 1..5")

    def to_record(self) -> dict:
        return {
            "student_id": self.student_id,
            "level": self.level,
            "comment": self.comment,
            "at": isoformat(self.at),
        }

    @classmethod
    def from_record(cls, rec: Mapping) -> "FeedbackResponse":
        return cls(rec["student_id"], rec["level"], parse_ts(rec["at"]), rec["comment"])


@dataclass
class FeedbackSession:
    id: str
    channel_id: str
    label: str
    state: SessionState = SessionState.OPEN
    responses: list = field(default_factory=list)

    def record(self, response: FeedbackResponse) -> bool:
        """Store a response; a repeat by the same student overwrites (last
        write wins). Returns True when an earlier value was replaced."""
        if self.state is not SessionState.OPEN:
            raise Conflict(f"feedback session {self.id} is closed")
        for i, existing in enumerate(self.responses):
            if existing.student_id == response.student_id:
                if response.comment is None:
                    response = replace(response, comment=existing.comment)
                self.responses[i] = response
                return True
        self.responses.append(response)
        return False

    def response_of(self, student_id: str) -> Optional[FeedbackResponse]:
        for r in self.responses:
            if r.student_id == student_id:
                return r
        return None

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "channel_id": self.channel_id,
            "label": self.label,
            "state": self.state.value,
            "responses": [r.to_record() for r in self.responses],
        }

    @classmethod
    def from_record(cls, rec: Mapping) -> "FeedbackSession":
        return cls(
            id=rec["id"],
            channel_id=rec["channel_id"],
            label=rec["label"],
            state=SessionState(rec["state"]),
            responses=[FeedbackResponse.from_record(r) for r in rec["responses"]],
        )


# ---------------------------------------------------------------------------
# Histograms & presence
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HistogramBucket:
    label: str
    count: int


@dataclass(frozen=True)
class Histogram:
    buckets: tuple
    total: int

    def __post_init__(self) -> None:
        if self.total != sum(b.count for b in self.buckets):
            raise InvalidInput("histogram total must equal the sum of bucket counts")

    def to_record(self) -> dict:
        return {
            "buckets": [{"label": b.label, "count": b.count} for b in self.buckets],
            "total": self.total,
        }


#: Decile labels used when charting percentage answers; the top bucket
#: absorbs 100.
PERCENT_BUCKET_LABELS = tuple(
    ["0-9", "10-19", "20-29", "30-39", "40-49", "50-59", "60-69", "70-79", "80-89", "90-100"]
)


def _normalize_text(value: str) -> str:
    return value.strip().casefold()


def aggregate_survey(responses: Sequence[SurveyResponse], question: Question) -> Histogram:
    """Count responses to one question into a chartable histogram.

    five_level answers bucket per option label, percentage answers per
    decile, free_text per distinct normalized (trimmed, case-folded) text.
    """
    for r in responses:
        if r.response_type is not question.response_type:
            raise InvalidInput(
                f"response type {r.response_type.value} does not match "
                f"question type {question.response_type.value}"
            )
        if r.question_index != question.index:
            raise InvalidInput("response belongs to a different question")

    if question.response_type is ResponseType.FIVE_LEVEL:
        counts = [0] * 5
        for r in responses:
            counts[r.value - 1] += 1
        buckets = tuple(
            HistogramBucket(label, count) for label, count in zip(question.options, counts)
        )
    elif question.response_type is ResponseType.PERCENTAGE:
        counts = [0] * 10
        for r in responses:
            counts[min(r.value // 10, 9)] += 1
        buckets = tuple(
            HistogramBucket(label, count) for label, count in zip(PERCENT_BUCKET_LABELS, counts)
        )
    else:
        by_text: dict = {}
        for r in responses:
            key = _normalize_text(r.value)
            by_text[key] = by_text.get(key, 0) + 1
        buckets = tuple(HistogramBucket(k, by_text[k]) for k in sorted(by_text))

    return Histogram(buckets=buckets, total=len(responses))


@dataclass(frozen=True)
class PresenceSnapshot:
    online: int
    offline: int
    total: int

    def __post_init__(self) -> None:
        if self.total != self.online + self.offline:
            raise InvalidInput("presence total must equal online + offline")

    def to_record(self) -> dict:
        return {"online": self.online, "offline": self.offline, "total": self.total}


def presence_of(roster_states: Mapping[str, bool]) -> PresenceSnapshot:
    """Summarize a member -> online-flag map into counts."""
    online = sum(1 for is_online in roster_states.values() if is_online)
    return PresenceSnapshot(online=online, offline=len(roster_states) - online, total=len(roster_states))


# ---------------------------------------------------------------------------
# Auth & audit records
# ---------------------------------------------------------------------------

@dataclass
class ApiKey:
    """An instructor credential; only the salted hash of the secret is kept."""

    key_id: str
    secret_hash: str
    label: str
    enabled: bool = True

    def to_record(self) -> dict:
        return {
            "key_id": self.key_id,
            "secret_hash": self.secret_hash,
            "label": self.label,
            "enabled": self.enabled,
        }

    @classmethod
    def from_record(cls, rec: Mapping) -> "ApiKey":
        return cls(rec["key_id"], rec["secret_hash"], rec["label"], rec["enabled"])


@dataclass
class AuditEvent:
    ts: datetime
    actor: str
    action: str
    params: dict
    outcome: Outcome
    detail: str = ""

    def to_record(self) -> dict:
        return {
            "ts": isoformat(self.ts),
            "actor": self.actor,
            "action": self.action,
            "params": {k: str(v) for k, v in self.params.items()},
            "outcome": self.outcome.value,
            "detail": self.detail,
        }
