"""Chat gateway abstraction and a deterministic in-process simulation.

The engine talks to chat exclusively through :class:`ChatGateway`
actions and receives :class:`ChatEvent` values back. The simulated
platform keeps guilds, channels, members and DMs in plain dicts, hands
out monotonically increasing message refs, and logs every action and
event so that two runs with the same seed produce byte-identical
streams.
"""

from __future__ import annotations

import json
import random
import threading
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from typing import Callable, Iterable, List, Optional, Sequence

from .core import EduBotError, InvalidInput, NotFound, Unavailable, isoformat


class ScenarioError(EduBotError):
    """A scenario file is malformed; carries the offending line number."""

    def __init__(self, message: str, line: int = 0):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line


# ---------------------------------------------------------------------------
# Buttons, actions, events
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Button:
    custom_id: str
    label: str


@dataclass(frozen=True)
class SendMessage:
    channel_id: str
    text: str
    buttons: tuple = ()


@dataclass(frozen=True)
class SendDM:
    member_id: str
    text: str
    buttons: tuple = ()


@dataclass(frozen=True)
class EditMessage:
    channel_id: str
    message_ref: int
    text: str


@dataclass(frozen=True)
class DeleteMessages:
    channel_id: str
    limit: int


@dataclass(frozen=True)
class GiveRole:
    member_id: str
    role: str


@dataclass(frozen=True)
class FetchPresence:
    guild_id: str


@dataclass(frozen=True)
class Ping:
    pass


@dataclass(frozen=True)
class ActionAck:
    """What the platform reports back for one action."""

    ok: bool
    message_ref: Optional[int] = None
    deleted: int = 0
    presence: Optional[dict] = None
    latency_ms: float = 0.0
    error: str = ""


@dataclass(frozen=True)
class DirectMessage:
    """A member wrote to the bot in a DM."""

    member_id: str
    text: str
    at: datetime
    display_name: str = ""


@dataclass(frozen=True)
class ButtonClick:
    """A member pressed a button on a bot message."""

    member_id: str
    channel_id: str
    message_ref: int
    custom_id: str
    at: datetime


@dataclass(frozen=True)
class MemberPresenceChange:
    member_id: str
    online: bool
    at: datetime


ChatEvent = object  # union of DirectMessage | ButtonClick | MemberPresenceChange


class ChatGateway:
    """What the engine needs from a chat platform."""

    def execute(self, bot_id: str, action) -> ActionAck:  # pragma: no cover - interface
        raise NotImplementedError

    def connect(self, bot_id: str, token: str) -> None:  # pragma: no cover - interface
        raise NotImplementedError

    def disconnect(self, bot_id: str) -> None:  # pragma: no cover - interface
        raise NotImplementedError

    def subscribe(self, bot_id: str, callback: Callable) -> None:  # pragma: no cover
        raise NotImplementedError


# ---------------------------------------------------------------------------
# Simulation clock
# ---------------------------------------------------------------------------

_SIM_EPOCH = datetime(2025, 1, 6, 9, 0, 0, tzinfo=timezone.utc)


class SimClock:
    """Monotone virtual clock; advances only when told to."""

    def __init__(self, base: datetime = _SIM_EPOCH):
        self._now = base
        self._lock = threading.Lock()

    def now(self) -> datetime:
        with self._lock:
            return self._now

    def advance(self, ms: int) -> datetime:
        if ms < 0:
            raise InvalidInput("clock can only move forward")
        with self._lock:
            self._now += timedelta(milliseconds=ms)
            return self._now

    def set(self, at: datetime) -> None:
        with self._lock:
            if at < self._now:
                raise InvalidInput("clock can only move forward")
            self._now = at


class WallClock:
    """Real time behind the same ``now()`` face as :class:`SimClock`."""

    @staticmethod
    def now() -> datetime:
        return datetime.now(timezone.utc)


# ---------------------------------------------------------------------------
# Simulated platform state
# ---------------------------------------------------------------------------

@dataclass
class _Message:
    ref: int
    channel_id: str
    author: str
    text: str
    buttons: tuple = ()
    deleted: bool = False


@dataclass
class _Member:
    id: str
    display_name: str
    online: bool = True
    roles: set = field(default_factory=set)
    dm_inbox: list = field(default_factory=list)


@dataclass
class _Guild:
    id: str
    channels: dict = field(default_factory=dict)  # channel_id -> [message refs]
    members: dict = field(default_factory=dict)   # member_id -> _Member
    next_ref: int = 1


class SimulatedChatPlatform(ChatGateway):
    """Deterministic chat platform double.

    All mutation goes through :meth:`execute` (bot side) or the
    ``member_*`` methods (student side). Every call appends one line to
    the event log; the log, serialized, is the canonical trace a
    determinism check compares across runs.
    """

    def __init__(self, clock: Optional[SimClock] = None, seed: int = 0,
                 latency_range_ms: tuple = (1, 8)):
        self.clock = clock or SimClock()
        self._rng = random.Random(seed)
        self._latency_range_ms = latency_range_ms
        self._guilds: dict = {}
        self._connected: dict = {}  # bot_id -> guild_id
        self._tokens: dict = {}     # token -> guild_id
        self._subscribers: dict = {}  # bot_id -> callback(event)
        self._log: list = []
        self._fail_next: list = []
        self._lock = threading.RLock()

    # -- world building ----------------------------------------------------

    def create_guild(self, guild_id: str) -> None:
        with self._lock:
            if guild_id in self._guilds:
                raise InvalidInput(f"guild {guild_id} already exists")
            self._guilds[guild_id] = _Guild(id=guild_id)

    def create_channel(self, guild_id: str, channel_id: str) -> None:
        with self._lock:
            guild = self._guild(guild_id)
            if channel_id in guild.channels:
                raise InvalidInput(f"channel {channel_id} already exists")
            guild.channels[channel_id] = []

    def add_member(self, guild_id: str, member_id: str, display_name: str = "",
                   online: bool = True) -> None:
        with self._lock:
            guild = self._guild(guild_id)
            if member_id in guild.members:
                raise InvalidInput(f"member {member_id} already in guild")
            guild.members[member_id] = _Member(
                id=member_id, display_name=display_name or member_id, online=online
            )

    def register_token(self, token: str, guild_id: str) -> None:
        with self._lock:
            self._guild(guild_id)
            self._tokens[token] = guild_id

    def has_token(self, token: str) -> bool:
        with self._lock:
            return token in self._tokens

    def subscribe(self, bot_id: str, callback: Callable) -> None:
        with self._lock:
            self._subscribers[bot_id] = callback

    def fail_next(self, action_type: str) -> None:
        """Arm a one-shot failure for the next action of the given type."""
        with self._lock:
            self._fail_next.append(action_type)

    # -- gateway interface ---------------------------------------------------

    def connect(self, bot_id: str, token: str) -> None:
        with self._lock:
            guild_id = self._tokens.get(token)
            if guild_id is None:
                raise Unavailable(f"token for bot {bot_id} was rejected")
            self._connected[bot_id] = guild_id
            self._record("connect", {"bot_id": bot_id, "guild_id": guild_id})

    def disconnect(self, bot_id: str) -> None:
        with self._lock:
            self._connected.pop(bot_id, None)
            self._record("disconnect", {"bot_id": bot_id})

    def execute(self, bot_id: str, action) -> ActionAck:
        with self._lock:
            guild_id = self._connected.get(bot_id)
            if guild_id is None:
                raise Unavailable(f"bot {bot_id} is not connected")
            guild = self._guild(guild_id)
            latency = float(self._rng.randint(*self._latency_range_ms))
            kind = type(action).__name__
            if kind in self._fail_next:
                self._fail_next.remove(kind)
                self._record("action_failed", {"bot_id": bot_id, "kind": kind})
                return ActionAck(ok=False, latency_ms=latency, error=f"{kind} refused")

            if isinstance(action, Ping):
                ack = ActionAck(ok=True, latency_ms=latency)
            elif isinstance(action, SendMessage):
                ref = self._post(guild, action.channel_id, f"bot:{bot_id}",
                                 action.text, action.buttons)
                ack = ActionAck(ok=True, message_ref=ref, latency_ms=latency)
            elif isinstance(action, SendDM):
                member = self._member(guild, action.member_id)
                ref = guild.next_ref
                guild.next_ref += 1
                member.dm_inbox.append(
                    _Message(ref=ref, channel_id=f"dm:{member.id}",
                             author=f"bot:{bot_id}", text=action.text,
                             buttons=tuple(action.buttons))
                )
                ack = ActionAck(ok=True, message_ref=ref, latency_ms=latency)
            elif isinstance(action, EditMessage):
                msg = self._find_message(guild, action.channel_id, action.message_ref)
                msg.text = action.text
                ack = ActionAck(ok=True, message_ref=msg.ref, latency_ms=latency)
            elif isinstance(action, DeleteMessages):
                refs = guild.channels.get(action.channel_id)
                if refs is None:
                    raise NotFound(f"channel {action.channel_id} not found")
                alive = [r for r in refs if not r.deleted]
                victims = alive[-action.limit:] if action.limit else []
                for m in victims:
                    m.deleted = True
                ack = ActionAck(ok=True, deleted=len(victims), latency_ms=latency)
            elif isinstance(action, GiveRole):
                member = self._member(guild, action.member_id)
                member.roles.add(action.role)
                ack = ActionAck(ok=True, latency_ms=latency)
            elif isinstance(action, FetchPresence):
                members = guild.members.values()
                online = sum(1 for m in members if m.online)
                ack = ActionAck(ok=True, latency_ms=latency, presence={
                    "online": online,
                    "offline": len(guild.members) - online,
                    "total": len(guild.members),
                })
            else:
                raise InvalidInput(f"unknown action {kind}")

            self._record("action", {
                "bot_id": bot_id, "kind": kind,
                "detail": _action_detail(action), "ack": _ack_detail(ack),
            })
            return ack

    # -- member (student) side -------------------------------------------

    # Events are dispatched after the lock is released: subscribers run the
    # engine synchronously, and the engine calls back into execute().

    def member_dm(self, guild_id: str, member_id: str, text: str) -> None:
        with self._lock:
            guild = self._guild(guild_id)
            member = self._member(guild, member_id)
            at = self.clock.now()
            self._record("member_dm", {"guild_id": guild_id, "member_id": member_id,
                                       "text": text})
            targets = self._targets(guild_id)
            event = DirectMessage(member_id=member_id, text=text, at=at,
                                  display_name=member.display_name)
        self._dispatch(targets, event)

    def member_click(self, guild_id: str, member_id: str, custom_id: str,
                     channel_id: Optional[str] = None,
                     message_ref: Optional[int] = None) -> None:
        """Press a button. Without an explicit ref, the newest live message
        carrying that button (channel post or DM to this member) wins."""
        with self._lock:
            guild = self._guild(guild_id)
            member = self._member(guild, member_id)
            if message_ref is None:
                candidates: List[_Message] = []
                for refs in guild.channels.values():
                    candidates.extend(refs)
                candidates.extend(member.dm_inbox)
                hits = [m for m in candidates
                        if not m.deleted and any(b.custom_id == custom_id for b in m.buttons)]
                if not hits:
                    raise NotFound(f"no live message offers button {custom_id}")
                target = max(hits, key=lambda m: m.ref)
                channel_id, message_ref = target.channel_id, target.ref
            at = self.clock.now()
            self._record("member_click", {
                "guild_id": guild_id, "member_id": member_id,
                "custom_id": custom_id, "channel_id": channel_id,
                "message_ref": message_ref,
            })
            targets = self._targets(guild_id)
            event = ButtonClick(member_id=member_id, channel_id=channel_id,
                                message_ref=message_ref, custom_id=custom_id, at=at)
        self._dispatch(targets, event)

    def set_presence(self, guild_id: str, member_id: str, online: bool) -> None:
        with self._lock:
            guild = self._guild(guild_id)
            member = self._member(guild, member_id)
            member.online = online
            at = self.clock.now()
            self._record("presence", {"guild_id": guild_id, "member_id": member_id,
                                      "online": online})
            targets = self._targets(guild_id)
            event = MemberPresenceChange(member_id=member_id, online=online, at=at)
        self._dispatch(targets, event)

    # -- inspection --------------------------------------------------------

    def channel_messages(self, guild_id: str, channel_id: str) -> list:
        with self._lock:
            guild = self._guild(guild_id)
            refs = guild.channels.get(channel_id)
            if refs is None:
                raise NotFound(f"channel {channel_id} not found")
            return [m for m in refs if not m.deleted]

    def dm_inbox(self, guild_id: str, member_id: str) -> list:
        with self._lock:
            guild = self._guild(guild_id)
            return list(self._member(guild, member_id).dm_inbox)

    def member_roles(self, guild_id: str, member_id: str) -> set:
        with self._lock:
            guild = self._guild(guild_id)
            return set(self._member(guild, member_id).roles)

    def event_log(self) -> list:
        with self._lock:
            return list(self._log)

    def event_stream_bytes(self) -> bytes:
        """Canonical serialization of everything that happened, for
        byte-level comparison between runs."""
        with self._lock:
            lines = [json.dumps(entry, sort_keys=True, separators=(",", ":"))
                     for entry in self._log]
        return ("\n".join(lines) + "\n").encode("utf-8")

    # -- internals ---------------------------------------------------------

    def _guild(self, guild_id: str) -> _Guild:
        guild = self._guilds.get(guild_id)
        if guild is None:
            raise NotFound(f"guild {guild_id} not found")
        return guild

    @staticmethod
    def _member(guild: _Guild, member_id: str) -> _Member:
        member = guild.members.get(member_id)
        if member is None:
            raise NotFound(f"member {member_id} not in guild {guild.id}")
        return member

    def _post(self, guild: _Guild, channel_id: str, author: str, text: str,
              buttons: Iterable[Button]) -> int:
        refs = guild.channels.get(channel_id)
        if refs is None:
            raise NotFound(f"channel {channel_id} not found")
        ref = guild.next_ref
        guild.next_ref += 1
        refs.append(_Message(ref=ref, channel_id=channel_id, author=author,
                             text=text, buttons=tuple(buttons)))
        return ref

    def _find_message(self, guild: _Guild, channel_id: str, ref: int) -> _Message:
        for m in guild.channels.get(channel_id, []):
            if m.ref == ref and not m.deleted:
                return m
        raise NotFound(f"message {ref} not found in {channel_id}")

    def _targets(self, guild_id: str) -> list:
        return [self._subscribers[bot_id]
                for bot_id, gid in self._connected.items()
                if gid == guild_id and bot_id in self._subscribers]

    @staticmethod
    def _dispatch(targets: Sequence[Callable], event) -> None:
        for callback in targets:
            callback(event)

    def _record(self, kind: str, payload: dict) -> None:
        self._log.append({"ts": isoformat(self.clock.now()), "kind": kind, **payload})


def _action_detail(action) -> dict:
    if isinstance(action, SendMessage):
        return {"channel_id": action.channel_id, "text": action.text,
                "buttons": [b.custom_id for b in action.buttons]}
    if isinstance(action, SendDM):
        return {"member_id": action.member_id, "text": action.text,
                "buttons": [b.custom_id for b in action.buttons]}
    if isinstance(action, EditMessage):
        return {"channel_id": action.channel_id, "message_ref": action.message_ref,
                "text": action.text}
    if isinstance(action, DeleteMessages):
        return {"channel_id": action.channel_id, "limit": action.limit}
    if isinstance(action, GiveRole):
        return {"member_id": action.member_id, "role": action.role}
    if isinstance(action, FetchPresence):
        return {"guild_id": action.guild_id}
    return {}


def _ack_detail(ack: ActionAck) -> dict:
    out: dict = {"ok": ack.ok}
    if ack.message_ref is not None:
        out["message_ref"] = ack.message_ref
    if ack.deleted:
        out["deleted"] = ack.deleted
    if ack.presence is not None:
        out["presence"] = ack.presence
    return out


# ---------------------------------------------------------------------------
# Scenario files
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScenarioStep:
    """One line of a scenario: either an API call or a chat-side event."""

    at_ms: int
    kind: str          # "api" | "chat"
    payload: dict


@dataclass(frozen=True)
class Scenario:
    name: str
    seed: int
    guild_id: str
    channels: tuple
    members: tuple     # of (member_id, display_name) pairs
    steps: tuple


def parse_scenario(text: str, name: str = "scenario") -> Scenario:
    """Parse a JSONL scenario: a header object, then one step per line.

    Raises :class:`ScenarioError` with a line number on any malformed
    line so suite failures point at the exact offender.
    """
    lines = text.splitlines()
    header = None
    steps: list = []
    last_at = -1
    for lineno, raw in enumerate(lines, start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        try:
            obj = json.loads(stripped)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"invalid JSON: {exc.msg}", lineno) from None
        if not isinstance(obj, dict):
            raise ScenarioError("each line must be a JSON object", lineno)
        if header is None:
            for key in ("seed", "guild_id", "channels", "members"):
                if key not in obj:
                    raise ScenarioError(f"header is missing {key!r}", lineno)
            members = []
            for m in obj["members"]:
                if isinstance(m, str):
                    members.append((m, m))
                elif isinstance(m, list) and len(m) == 2:
                    members.append((m[0], m[1]))
                else:
                    raise ScenarioError("members must be ids or [id, display_name] pairs", lineno)
            header = {
                "seed": int(obj["seed"]),
                "guild_id": obj["guild_id"],
                "channels": tuple(obj["channels"]),
                "members": tuple(members),
            }
            continue
        kind = obj.get("kind")
        if kind not in ("api", "chat"):
            raise ScenarioError("step kind must be \"api\" or \"chat\"", lineno)
        if "at_ms" not in obj:
            raise ScenarioError("step is missing at_ms", lineno)
        at_ms = int(obj["at_ms"])
        if at_ms < last_at:
            raise ScenarioError("steps must be ordered by at_ms", lineno)
        last_at = at_ms
        payload = {k: v for k, v in obj.items() if k not in ("kind", "at_ms")}
        if kind == "api":
            for key in ("method", "path"):
                if key not in payload:
                    raise ScenarioError(f"api step is missing {key!r}", lineno)
        else:
            if payload.get("event") not in ("dm", "click", "presence"):
                raise ScenarioError("chat step event must be dm, click or presence", lineno)
        steps.append(ScenarioStep(at_ms=at_ms, kind=kind, payload=payload))
    if header is None:
        raise ScenarioError("scenario has no header line")
    return Scenario(name=name, steps=tuple(steps), **header)
