"""Simulated platform tests: world building, actions, events, scenarios."""

from datetime import timedelta

import pytest

from edubot.core import InvalidInput, NotFound, Unavailable
from edubot.gateway import (
    Button,
    DeleteMessages,
    DirectMessage,
    EditMessage,
    FetchPresence,
    GiveRole,
    MemberPresenceChange,
    Ping,
    ButtonClick,
    ScenarioError,
    SendDM,
    SendMessage,
    SimClock,
    SimulatedChatPlatform,
    parse_scenario,
)

from conftest import CHANNEL, GUILD, MEMBERS, build_world


def connected(seed=7):
    clock, platform = build_world(seed=seed)
    platform.register_token("tok-1", GUILD)
    platform.connect("b1", "tok-1")
    return clock, platform


# ---------------------------------------------------------------------------
# clock
# ---------------------------------------------------------------------------

def test_clock_is_forward_only():
    clock = SimClock()
    t0 = clock.now()
    assert clock.advance(1500) == t0 + timedelta(milliseconds=1500)
    clock.set(t0 + timedelta(seconds=10))
    with pytest.raises(InvalidInput):
        clock.set(t0)
    with pytest.raises(InvalidInput):
        clock.advance(-1)


# ---------------------------------------------------------------------------
# world building and connection
# ---------------------------------------------------------------------------

def test_duplicate_world_entities_rejected():
    _, platform = build_world()
    with pytest.raises(InvalidInput):
        platform.create_guild(GUILD)
    with pytest.raises(InvalidInput):
        platform.create_channel(GUILD, CHANNEL)
    with pytest.raises(InvalidInput):
        platform.add_member(GUILD, "s1")
    with pytest.raises(NotFound):
        platform.create_channel("nowhere", "c")


def test_connect_requires_registered_token():
    _, platform = build_world()
    with pytest.raises(Unavailable):
        platform.connect("b1", "unregistered")
    platform.register_token("tok-1", GUILD)
    platform.connect("b1", "tok-1")
    ack = platform.execute("b1", Ping())
    assert ack.ok


def test_register_token_needs_existing_guild():
    _, platform = build_world()
    with pytest.raises(NotFound):
        platform.register_token("tok-x", "nowhere")


def test_disconnected_bot_cannot_act():
    _, platform = connected()
    platform.disconnect("b1")
    with pytest.raises(Unavailable):
        platform.execute("b1", Ping())


# ---------------------------------------------------------------------------
# actions
# ---------------------------------------------------------------------------

def test_post_and_dm_share_monotone_refs():
    _, platform = connected()
    refs = [
        platform.execute("b1", SendMessage(channel_id=CHANNEL, text="a")).message_ref,
        platform.execute("b1", SendDM(member_id="s1", text="b")).message_ref,
        platform.execute("b1", SendMessage(channel_id=CHANNEL, text="c")).message_ref,
    ]
    assert refs == sorted(refs)
    assert len(set(refs)) == 3
    assert [m.text for m in platform.channel_messages(GUILD, CHANNEL)] == ["a", "c"]
    assert [m.text for m in platform.dm_inbox(GUILD, "s1")] == ["b"]


def test_edit_message_changes_live_text_only():
    _, platform = connected()
    ref = platform.execute("b1", SendMessage(channel_id=CHANNEL, text="before")).message_ref
    platform.execute("b1", EditMessage(channel_id=CHANNEL, message_ref=ref, text="after"))
    assert platform.channel_messages(GUILD, CHANNEL)[0].text == "after"
    platform.execute("b1", DeleteMessages(channel_id=CHANNEL, limit=1))
    with pytest.raises(NotFound):
        platform.execute("b1", EditMessage(channel_id=CHANNEL, message_ref=ref, text="zombie"))


def test_delete_removes_newest_n():
    _, platform = connected()
    for text in ("one", "two", "three"):
        platform.execute("b1", SendMessage(channel_id=CHANNEL, text=text))
    ack = platform.execute("b1", DeleteMessages(channel_id=CHANNEL, limit=2))
    assert ack.deleted == 2
    assert [m.text for m in platform.channel_messages(GUILD, CHANNEL)] == ["one"]
    # deleting more than what is left deletes what is left
    ack = platform.execute("b1", DeleteMessages(channel_id=CHANNEL, limit=5))
    assert ack.deleted == 1
    assert platform.channel_messages(GUILD, CHANNEL) == []


def test_give_role_and_presence():
    _, platform = connected()
    platform.execute("b1", GiveRole(member_id="s1", role="helper"))
    assert platform.member_roles(GUILD, "s1") == {"helper"}
    platform.set_presence(GUILD, "s2", online=False)
    ack = platform.execute("b1", FetchPresence(guild_id=GUILD))
    assert ack.presence == {"online": len(MEMBERS) - 1, "offline": 1,
                            "total": len(MEMBERS)}


def test_unknown_targets_raise_not_found():
    _, platform = connected()
    with pytest.raises(NotFound):
        platform.execute("b1", SendMessage(channel_id="nowhere", text="x"))
    with pytest.raises(NotFound):
        platform.execute("b1", SendDM(member_id="ghost", text="x"))


def test_latency_is_seeded_and_in_range():
    acks_a = []
    _, platform = connected(seed=42)
    for _ in range(20):
        acks_a.append(platform.execute("b1", Ping()).latency_ms)
    _, platform = connected(seed=42)
    acks_b = [platform.execute("b1", Ping()).latency_ms for _ in range(20)]
    assert acks_a == acks_b
    assert all(1 <= v <= 8 for v in acks_a)


def test_fail_next_is_one_shot_per_action_type():
    _, platform = connected()
    platform.fail_next("SendMessage")
    ack = platform.execute("b1", Ping())
    assert ack.ok  # a different action type is unaffected
    ack = platform.execute("b1", SendMessage(channel_id=CHANNEL, text="x"))
    assert not ack.ok and "SendMessage" in ack.error
    ack = platform.execute("b1", SendMessage(channel_id=CHANNEL, text="x"))
    assert ack.ok


# ---------------------------------------------------------------------------
# member events
# ---------------------------------------------------------------------------

def test_events_reach_subscribed_bots_synchronously():
    clock, platform = connected()
    seen = []
    platform.subscribe("b1", seen.append)
    platform.member_dm(GUILD, "s1", "hello")
    platform.set_presence(GUILD, "s2", online=False)
    assert [type(e).__name__ for e in seen] == ["DirectMessage",
                                                "MemberPresenceChange"]
    dm = seen[0]
    assert isinstance(dm, DirectMessage)
    assert (dm.member_id, dm.text, dm.display_name) == ("s1", "hello", "S1")
    assert dm.at == clock.now()


def test_click_targets_newest_live_carrier():
    _, platform = connected()
    seen = []
    platform.subscribe("b1", seen.append)
    buttons = (Button(custom_id="vote:x:1", label="1"),)
    platform.execute("b1", SendMessage(channel_id=CHANNEL, text="old", buttons=buttons))
    new_ref = platform.execute(
        "b1", SendDM(member_id="s1", text="new", buttons=buttons)).message_ref
    platform.member_click(GUILD, "s1", "vote:x:1")
    click = seen[-1]
    assert isinstance(click, ButtonClick)
    assert click.message_ref == new_ref  # the DM is newer than the post

    platform.member_click(GUILD, "s1", "vote:x:1", channel_id=CHANNEL,
                          message_ref=1)  # explicit target still works
    assert seen[-1].message_ref == 1

    with pytest.raises(NotFound):
        platform.member_click(GUILD, "s1", "no-such-button")


def test_event_callbacks_may_call_back_into_execute():
    # engine handlers respond to events with actions; that re-entry must
    # not deadlock or corrupt the log
    _, platform = connected()

    def responder(event):
        if isinstance(event, DirectMessage):
            platform.execute("b1", SendDM(member_id=event.member_id, text="pong"))

    platform.subscribe("b1", responder)
    platform.member_dm(GUILD, "s1", "ping")
    assert [m.text for m in platform.dm_inbox(GUILD, "s1")] == ["pong"]


def test_event_stream_is_reproducible_byte_for_byte():
    def run():
        clock, platform = connected(seed=11)
        platform.subscribe("b1", lambda e: None)
        platform.execute("b1", SendMessage(channel_id=CHANNEL, text="hi"))
        clock.advance(250)
        platform.member_dm(GUILD, "s1", "1423")
        platform.member_click(GUILD, "s2", "x", channel_id=CHANNEL, message_ref=1)
        platform.set_presence(GUILD, "s3", online=False)
        return platform.event_stream_bytes()

    stream = run()
    assert stream == run()
    assert len(stream.splitlines()) == 5  # connect + action + dm + click + presence
    assert stream.decode().count('"kind":"member_dm"') == 1


def test_event_timestamps_non_decreasing_per_member():
    clock, platform = connected()
    ats = []
    platform.subscribe("b1", lambda e: ats.append(e.at))
    for i in range(5):
        platform.member_dm(GUILD, "s1", f"m{i}")
        clock.advance(100)
    assert ats == sorted(ats)


# ---------------------------------------------------------------------------
# scenario parsing
# ---------------------------------------------------------------------------

GOOD_HEADER = ('{"seed": 3, "guild_id": "campus", "channels": ["general"], '
               '"members": ["s1", ["s2", "Sam"]]}')


def test_parse_scenario_happy_path():
    text = "\n".join([
        "# comment lines and blanks are skipped",
        "",
        GOOD_HEADER,
        '{"at_ms": 0, "kind": "api", "method": "POST", "path": "/api/bots"}',
        '{"at_ms": 100, "kind": "chat", "event": "dm", "member": "s1", "text": "1423"}',
    ])
    scenario = parse_scenario(text, name="demo")
    assert scenario.name == "demo"
    assert scenario.seed == 3
    assert scenario.members == (("s1", "s1"), ("s2", "Sam"))
    assert [s.kind for s in scenario.steps] == ["api", "chat"]
    assert scenario.steps[0].payload["method"] == "POST"
    assert "at_ms" not in scenario.steps[0].payload


@pytest.mark.parametrize("lines,line_no,fragment", [
    (["not json"], 1, "invalid JSON"),
    (['["a list"]'], 1, "JSON object"),
    (['{"seed": 1}'], 1, "missing"),
    ([GOOD_HEADER, '{"at_ms": 5, "kind": "nope"}'], 2, "api"),
    ([GOOD_HEADER, '{"kind": "api", "method": "GET", "path": "/x"}'], 2, "at_ms"),
    ([GOOD_HEADER,
      '{"at_ms": 100, "kind": "api", "method": "GET", "path": "/x"}',
      '{"at_ms": 50, "kind": "api", "method": "GET", "path": "/x"}'], 3, "ordered"),
    ([GOOD_HEADER, '{"at_ms": 1, "kind": "api", "path": "/x"}'], 2, "method"),
    ([GOOD_HEADER, '{"at_ms": 1, "kind": "chat", "event": "wave"}'], 2, "dm"),
    (['{"seed": 1, "guild_id": "g", "channels": [], "members": [42]}'], 1,
     "pairs"),
], ids=["bad-json", "non-object", "missing-header-key", "bad-kind",
        "missing-at", "decreasing-at", "api-missing-method", "bad-event",
        "bad-member-entry"])
def test_parse_scenario_errors_carry_line_numbers(lines, line_no, fragment):
    with pytest.raises(ScenarioError) as err:
        parse_scenario("\n".join(lines))
    assert err.value.line == line_no
    assert fragment in str(err.value)


def test_parse_scenario_requires_header():
    with pytest.raises(ScenarioError):
        parse_scenario("# nothing but comments\n")
