"""Shared fixtures: a small simulated guild and a service wired to it."""

import random
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import pytest
from fastapi.testclient import TestClient

from edubot.api import Service, ServiceConfig, create_app
from edubot.core import BotInstance, BotState, Group
from edubot.engine import Engine, EngineContext
from edubot.gateway import SimClock, SimulatedChatPlatform

GUILD = "campus"
CHANNEL = "general"
MEMBERS = ("s1", "s2", "s3", "s4")


def build_world(seed=7, members=MEMBERS, guild=GUILD, channels=(CHANNEL,)):
    clock = SimClock()
    platform = SimulatedChatPlatform(clock=clock, seed=seed)
    platform.create_guild(guild)
    for channel_id in channels:
        platform.create_channel(guild, channel_id)
    for member_id in members:
        platform.add_member(guild, member_id, display_name=member_id.upper())
    return clock, platform


@dataclass
class World:
    """One service over one simulated guild, plus an authenticated client."""

    clock: SimClock
    platform: SimulatedChatPlatform
    service: Service
    client: TestClient
    headers: dict
    key_id: str

    def request(self, method: str, path: str, *, expect: int = 200, **kw):
        kw.setdefault("headers", self.headers)
        response = self.client.request(method, path, **kw)
        assert response.status_code == expect, (
            f"{method} {path} -> {response.status_code}: {response.text}"
        )
        return response.json()

    def get(self, path: str, **kw):
        return self.request("GET", path, **kw)

    def post(self, path: str, **kw):
        return self.request("POST", path, **kw)

    def create_bot(self, groups: Optional[list] = None, name="demo",
                   token="tok-1", guild_id=GUILD, start=True) -> str:
        if groups is None:
            groups = [{"id": "g1", "channel_id": CHANNEL,
                       "roster": list(MEMBERS)}]
        body = self.post("/api/bots", json={
            "name": name, "guild_id": guild_id, "token": token,
            "groups": groups,
        })
        bot_id = body["data"]["id"]
        if start:
            self.post(f"/api/bots/{bot_id}/start")
        return bot_id


def make_world(tmp_path: Path, *, seed=7, members=MEMBERS,
               channels=(CHANNEL,), **config_kw) -> World:
    clock, platform = build_world(seed=seed, members=members, channels=channels)
    config_kw.setdefault("rate_limit_max", 10 ** 9)
    config = ServiceConfig(
        data_dir=tmp_path / "svc",
        secrets_path=tmp_path / "svc" / "secrets.json",
        passphrase="test-pass",
        idle_sweep_s=None,
        **config_kw,
    )
    service = Service(config, gateway=platform)
    record, credential = service.add_api_key("tester")
    client = TestClient(create_app(service), raise_server_exceptions=False)
    return World(clock=clock, platform=platform, service=service,
                 client=client, headers={"Authorization": f"Bearer {credential}"},
                 key_id=record.key_id)


@pytest.fixture
def world(tmp_path):
    w = make_world(tmp_path)
    yield w
    w.service.shutdown()
    w.client.close()


@dataclass
class EngineWorld:
    clock: SimClock
    platform: SimulatedChatPlatform
    engine: Engine
    audit_events: list


def make_engine(tmp_path=None, *, seed=7, members=MEMBERS, roster=None,
                on_attendance_closed=None, on_survey_closed=None,
                fault_commands=None) -> EngineWorld:
    """A directly driven engine: events arrive synchronously, no worker."""
    clock, platform = build_world(seed=seed, members=members)
    platform.register_token("tok-1", GUILD)
    platform.connect("b1", "tok-1")
    bot = BotInstance(id="b1", name="demo", token_ref="bot:b1:token",
                      guild_id=GUILD, state=BotState.RUNNING,
                      created_at=clock.now())
    audit_events = []
    ctx = EngineContext(
        bot=bot, gateway=platform, clock=clock.now,
        rng=random.Random(f"{seed}:b1"),
        audit=audit_events.append,
        on_attendance_closed=on_attendance_closed,
        on_survey_closed=on_survey_closed,
        fault_commands=fault_commands if fault_commands is not None else set(),
    )
    groups = [Group(id="g1", channel_id=CHANNEL,
                    roster=frozenset(roster if roster is not None else MEMBERS))]
    engine = Engine(ctx, groups=groups)
    platform.subscribe("b1", engine.handle_event)
    return EngineWorld(clock=clock, platform=platform, engine=engine,
                       audit_events=audit_events)


@pytest.fixture
def eng_world():
    return make_engine()
