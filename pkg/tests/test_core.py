"""Domain type tests: validation, round-trips and counting properties."""

from collections import Counter
from datetime import datetime, timedelta, timezone

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edubot.core import (
    AttendanceSession,
    AuditEvent,
    BotInstance,
    BotMode,
    BotState,
    CheckIn,
    Conflict,
    FeedbackResponse,
    FeedbackSession,
    FIVE_LEVEL_LABELS,
    Group,
    Histogram,
    HistogramBucket,
    InvalidInput,
    NotFound,
    Outcome,
    PERCENT_BUCKET_LABELS,
    PresenceSnapshot,
    Question,
    ResponseType,
    SATISFACTION_LABELS,
    SessionState,
    SurveyDefinition,
    SurveyKind,
    SurveyResponse,
    SurveyState,
    aggregate_survey,
    isoformat,
    parse_ts,
    presence_of,
    validate_attendance_code,
)

T0 = datetime(2025, 1, 6, 9, 0, 0, tzinfo=timezone.utc)


def ts(seconds: float) -> datetime:
    return T0 + timedelta(seconds=seconds)


# ---------------------------------------------------------------------------
# timestamps
# ---------------------------------------------------------------------------

def test_isoformat_rejects_naive():
    with pytest.raises(InvalidInput):
        isoformat(datetime(2025, 1, 6, 9, 0, 0))


def test_parse_ts_round_trip_and_zulu():
    assert parse_ts(isoformat(T0)) == T0
    assert parse_ts("2025-01-06T09:00:00Z") == T0


# ---------------------------------------------------------------------------
# bot lifecycle
# ---------------------------------------------------------------------------

def make_bot(state=BotState.STOPPED):
    return BotInstance(id="b1", name="demo", token_ref="bot:b1:token",
                       guild_id="campus", state=state, created_at=T0)


def test_bot_happy_path_transitions():
    bot = make_bot()
    for state in (BotState.STARTING, BotState.RUNNING, BotState.STOPPED):
        bot.transition(state)
    assert bot.state is BotState.STOPPED


@pytest.mark.parametrize("start,new", [
    (BotState.STOPPED, BotState.RUNNING),
    (BotState.STOPPED, BotState.STOPPED),
    (BotState.RUNNING, BotState.STARTING),
    (BotState.ERROR, BotState.RUNNING),
])
def test_bot_illegal_transitions_raise(start, new):
    bot = make_bot(state=start)
    with pytest.raises(Conflict):
        bot.transition(new)


def test_bot_error_reachable_from_anywhere_and_recoverable():
    for state in BotState:
        bot = make_bot(state=state)
        bot.transition(BotState.ERROR)
        assert bot.state is BotState.ERROR
    bot.transition(BotState.STOPPED)
    assert bot.state is BotState.STOPPED


def test_bot_record_round_trip_elides_token_ref():
    bot = make_bot(state=BotState.RUNNING)
    rec = bot.to_record()
    assert "token_ref" not in rec
    assert "token" not in str(rec)
    back = BotInstance.from_record(rec)
    assert back == bot  # token_ref is reconstructed by convention


def test_group_record_round_trip_sorts_roster():
    group = Group(id="g1", channel_id="general", roster=frozenset(["b", "a"]))
    rec = group.to_record()
    assert rec["roster"] == ["a", "b"]
    assert Group.from_record(rec) == group


def test_group_needs_id():
    with pytest.raises(InvalidInput):
        Group(id="", channel_id="general")


# ---------------------------------------------------------------------------
# attendance
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("code,valid", [
    ("1423", True), ("0000", True), ("9999", True),
    ("12", False), ("12345", False), ("142a", False), ("", False),
    ("14 3", False), ("١٤٢٣", False),  # non-ASCII digits are out
])
def test_validate_attendance_code(code, valid):
    assert validate_attendance_code(code) is valid


def test_session_rejects_bad_code():
    with pytest.raises(InvalidInput):
        AttendanceSession(id="a1", group_id="g1", code="12", opened_at=T0)


def test_checkin_dedup_keeps_first():
    session = AttendanceSession(id="a1", group_id="g1", code="1423", opened_at=T0)
    first = CheckIn(student_id="s1", display_name="S1", at=ts(1))
    assert session.add_checkin(first) is True
    assert session.add_checkin(
        CheckIn(student_id="s1", display_name="S1 again", at=ts(2))) is False
    assert session.present_count == 1
    assert session.checkins[0] == first


def test_checkin_closed_session_conflicts():
    session = AttendanceSession(id="a1", group_id="g1", code="1423", opened_at=T0)
    session.close(ts(10))
    with pytest.raises(Conflict):
        session.add_checkin(CheckIn("s1", "S1", ts(11)))
    with pytest.raises(Conflict):
        session.close(ts(12))


def test_checkin_before_open_rejected():
    session = AttendanceSession(id="a1", group_id="g1", code="1423",
                                opened_at=ts(10))
    with pytest.raises(InvalidInput):
        session.add_checkin(CheckIn("s1", "S1", ts(5)))


def test_session_record_round_trip():
    session = AttendanceSession(id="a1", group_id="g1", code="1423", opened_at=T0)
    session.add_checkin(CheckIn("s1", "S1", ts(1)))
    session.close(ts(30))
    assert AttendanceSession.from_record(session.to_record()) == session


@given(st.lists(st.sampled_from(["s1", "s2", "s3", "s4", "s5"]), max_size=40))
def test_checkin_dedup_property(arrivals):
    session = AttendanceSession(id="a1", group_id="g1", code="1423", opened_at=T0)
    for i, student in enumerate(arrivals):
        session.add_checkin(CheckIn(student, student.upper(), ts(i + 1)))
    assert session.present_count == len(set(arrivals))
    # first arrival per student is the one kept
    order = list(dict.fromkeys(arrivals))
    assert [c.student_id for c in session.checkins] == order


# ---------------------------------------------------------------------------
# surveys
# ---------------------------------------------------------------------------

def test_five_level_question_defaults_labels():
    q = Question(index=0, prompt="How hard?", response_type=ResponseType.FIVE_LEVEL)
    assert q.options == FIVE_LEVEL_LABELS


def test_five_level_question_wants_five_options():
    with pytest.raises(InvalidInput):
        Question(index=0, prompt="p", response_type=ResponseType.FIVE_LEVEL,
                 options=("a", "b"))


def test_non_five_level_questions_take_no_options():
    with pytest.raises(InvalidInput):
        Question(index=0, prompt="p", response_type=ResponseType.FREE_TEXT,
                 options=("a",))


def make_simple_survey(**kw):
    kw.setdefault("questions", [Question(0, "How hard?", ResponseType.FIVE_LEVEL)])
    return SurveyDefinition(id="srv1", kind=SurveyKind.SIMPLE, title="t",
                            channel_id="general", **kw)


def test_simple_survey_shape_enforced():
    with pytest.raises(InvalidInput):
        make_simple_survey(questions=[
            Question(0, "a", ResponseType.FIVE_LEVEL),
            Question(1, "b", ResponseType.FIVE_LEVEL),
        ])
    with pytest.raises(InvalidInput):
        make_simple_survey(questions=[Question(0, "a", ResponseType.FREE_TEXT)])
    with pytest.raises(InvalidInput):
        make_simple_survey(questions=[])


def test_question_indexes_contiguous():
    with pytest.raises(InvalidInput):
        SurveyDefinition(id="s", kind=SurveyKind.COMPLEX, title="t",
                         channel_id="c", questions=[
                             Question(0, "a", ResponseType.FREE_TEXT),
                             Question(2, "b", ResponseType.FREE_TEXT),
                         ])


def test_survey_due_only_when_open_and_timed():
    survey = make_simple_survey(duration_s=60)
    assert not survey.due(ts(3600))  # still a draft
    survey.state = SurveyState.OPEN
    survey.opened_at = T0
    assert not survey.due(ts(59))
    assert survey.due(ts(60))
    untimed = make_simple_survey()
    untimed.state = SurveyState.OPEN
    untimed.opened_at = T0
    assert not untimed.due(ts(10 ** 6))


def test_survey_question_lookup():
    survey = make_simple_survey()
    assert survey.question(0).prompt == "How hard?"
    with pytest.raises(NotFound):
        survey.question(1)


def test_survey_record_round_trip():
    survey = SurveyDefinition(
        id="srv2", kind=SurveyKind.COMPLEX, title="t", channel_id="c",
        questions=[
            Question(0, "a", ResponseType.FIVE_LEVEL),
            Question(1, "b", ResponseType.PERCENTAGE),
            Question(2, "c", ResponseType.FREE_TEXT),
        ],
        duration_s=300,
    )
    survey.opened_at = T0
    assert SurveyDefinition.from_record(survey.to_record()) == survey


@pytest.mark.parametrize("rtype,value,ok", [
    (ResponseType.FIVE_LEVEL, 1, True),
    (ResponseType.FIVE_LEVEL, 5, True),
    (ResponseType.FIVE_LEVEL, 0, False),
    (ResponseType.FIVE_LEVEL, 6, False),
    (ResponseType.FIVE_LEVEL, "3", False),
    (ResponseType.PERCENTAGE, 0, True),
    (ResponseType.PERCENTAGE, 100, True),
    (ResponseType.PERCENTAGE, 101, False),
    (ResponseType.PERCENTAGE, -1, False),
    (ResponseType.FREE_TEXT, "fine", True),
    (ResponseType.FREE_TEXT, 3, False),
])
def test_response_value_validation(rtype, value, ok):
    build = lambda: SurveyResponse(survey_id="s", question_index=0,
                                   student_id="s1", response_type=rtype,
                                   value=value, at=T0)
    if ok:
        assert build().value == value
    else:
        with pytest.raises(InvalidInput):
            build()


def test_response_record_round_trip():
    r = SurveyResponse("s", 1, "s1", ResponseType.PERCENTAGE, 85, ts(2))
    assert SurveyResponse.from_record(r.to_record()) == r


# ---------------------------------------------------------------------------
# feedback
# ---------------------------------------------------------------------------

def test_feedback_level_bounds():
    with pytest.raises(InvalidInput):
        FeedbackResponse(student_id="s1", level=0, at=T0)
    with pytest.raises(InvalidInput):
        FeedbackResponse(student_id="s1", level=6, at=T0)


def test_feedback_last_write_wins_keeps_comment():
    fb = FeedbackSession(id="f1", channel_id="c", label="week 1")
    assert fb.record(FeedbackResponse("s1", 4, ts(1), comment="nice")) is False
    assert fb.record(FeedbackResponse("s1", 2, ts(2))) is True
    assert len(fb.responses) == 1
    stored = fb.response_of("s1")
    assert stored.level == 2
    assert stored.comment == "nice"  # survives a comment-less overwrite
    assert fb.record(FeedbackResponse("s1", 5, ts(3), comment="better")) is True
    assert fb.response_of("s1").comment == "better"


def test_feedback_closed_session_conflicts():
    fb = FeedbackSession(id="f1", channel_id="c", label="l",
                         state=SessionState.CLOSED)
    with pytest.raises(Conflict):
        fb.record(FeedbackResponse("s1", 3, T0))


def test_feedback_record_round_trip():
    fb = FeedbackSession(id="f1", channel_id="c", label="l")
    fb.record(FeedbackResponse("s1", 4, ts(1), comment="ok"))
    fb.record(FeedbackResponse("s2", 2, ts(2)))
    assert FeedbackSession.from_record(fb.to_record()) == fb


# ---------------------------------------------------------------------------
# aggregation
# ---------------------------------------------------------------------------

def test_histogram_total_invariant_enforced():
    with pytest.raises(InvalidInput):
        Histogram(buckets=(HistogramBucket("a", 2),), total=3)


def five_level_question():
    return Question(0, "How hard?", ResponseType.FIVE_LEVEL)


def responses_of(values, rtype, index=0):
    return [
        SurveyResponse(survey_id="s", question_index=index,
                       student_id=f"s{i}", response_type=rtype,
                       value=v, at=ts(i))
        for i, v in enumerate(values)
    ]


def test_aggregate_five_level_matches_counter_oracle():
    values = [1, 3, 3, 5, 2, 3, 1]
    hist = aggregate_survey(responses_of(values, ResponseType.FIVE_LEVEL),
                            five_level_question())
    oracle = Counter(values)
    assert [b.count for b in hist.buckets] == [oracle.get(v, 0) for v in range(1, 6)]
    assert [b.label for b in hist.buckets] == list(FIVE_LEVEL_LABELS)
    assert hist.total == len(values)


def _decile_label(value: int) -> str:
    # independent binning rule, written the long way on purpose
    if value >= 90:
        return "90-100"
    low = (value // 10) * 10
    return f"{low}-{low + 9}"


def test_aggregate_percentage_matches_decile_oracle():
    values = [0, 9, 10, 55, 89, 90, 99, 100, 100]
    q = Question(0, "pct", ResponseType.PERCENTAGE)
    hist = aggregate_survey(responses_of(values, ResponseType.PERCENTAGE), q)
    oracle = Counter(_decile_label(v) for v in values)
    assert {b.label: b.count for b in hist.buckets if b.count} == dict(oracle)
    assert [b.label for b in hist.buckets] == list(PERCENT_BUCKET_LABELS)
    assert hist.total == len(values)


def test_aggregate_free_text_normalizes_and_sorts():
    values = ["More examples", "  more EXAMPLES ", "less math", "Less Math", "ok"]
    q = Question(0, "txt", ResponseType.FREE_TEXT)
    hist = aggregate_survey(responses_of(values, ResponseType.FREE_TEXT), q)
    assert [(b.label, b.count) for b in hist.buckets] == [
        ("less math", 2), ("more examples", 2), ("ok", 1),
    ]
    assert hist.total == 5


def test_aggregate_empty_input():
    hist = aggregate_survey([], five_level_question())
    assert hist.total == 0
    assert all(b.count == 0 for b in hist.buckets)


def test_aggregate_rejects_mismatched_responses():
    q = five_level_question()
    wrong_type = responses_of(["x"], ResponseType.FREE_TEXT)
    with pytest.raises(InvalidInput):
        aggregate_survey(wrong_type, q)
    wrong_index = responses_of([3], ResponseType.FIVE_LEVEL, index=2)
    with pytest.raises(InvalidInput):
        aggregate_survey(wrong_index, q)


_any_typed_values = st.one_of(
    st.tuples(st.just(ResponseType.FIVE_LEVEL),
              st.lists(st.integers(1, 5), max_size=60)),
    st.tuples(st.just(ResponseType.PERCENTAGE),
              st.lists(st.integers(0, 100), max_size=60)),
    st.tuples(st.just(ResponseType.FREE_TEXT),
              st.lists(st.text(min_size=0, max_size=8), max_size=60)),
)


def _question_for(rtype: ResponseType) -> Question:
    return Question(0, "q", rtype)


@given(_any_typed_values)
@settings(max_examples=150)
def test_aggregate_conserves_total(typed):
    rtype, values = typed
    hist = aggregate_survey(responses_of(values, rtype), _question_for(rtype))
    assert hist.total == len(values)
    assert sum(b.count for b in hist.buckets) == len(values)


@given(_any_typed_values, st.randoms(use_true_random=False))
@settings(max_examples=150)
def test_aggregate_permutation_invariant(typed, rng):
    rtype, values = typed
    question = _question_for(rtype)
    before = aggregate_survey(responses_of(values, rtype), question)
    shuffled = responses_of(values, rtype)
    rng.shuffle(shuffled)
    assert aggregate_survey(shuffled, question) == before


# ---------------------------------------------------------------------------
# presence
# ---------------------------------------------------------------------------

def test_presence_empty():
    assert presence_of({}) == PresenceSnapshot(0, 0, 0)


def test_presence_counts_by_filter_oracle():
    states = {"a": True, "b": False, "c": True}
    snap = presence_of(states)
    assert snap.online == len([m for m, on in states.items() if on])
    assert snap.offline == len([m for m, on in states.items() if not on])
    assert snap == PresenceSnapshot(2, 1, 3)


def test_presence_at_class_scale():
    snap = presence_of({f"s{i}": True for i in range(150)})
    assert snap == PresenceSnapshot(150, 0, 150)


def test_presence_total_invariant_enforced():
    with pytest.raises(InvalidInput):
        PresenceSnapshot(online=2, offline=1, total=4)


@given(st.dictionaries(st.text(min_size=1, max_size=6), st.booleans(),
                       max_size=40))
def test_presence_property(states):
    snap = presence_of(states)
    assert snap.online + snap.offline == snap.total == len(states)


# ---------------------------------------------------------------------------
# audit / api key records
# ---------------------------------------------------------------------------

def test_audit_event_stringifies_params():
    event = AuditEvent(ts=T0, actor="k1", action="x",
                       params={"n": 3, "flag": True}, outcome=Outcome.SUCCESS)
    rec = event.to_record()
    assert rec["params"] == {"n": "3", "flag": "True"}
    assert rec["outcome"] == "success"


def test_label_constants_are_five_each():
    assert len(FIVE_LEVEL_LABELS) == 5
    assert len(SATISFACTION_LABELS) == 5
    assert len(PERCENT_BUCKET_LABELS) == 10
    assert PERCENT_BUCKET_LABELS[0] == "0-9"
    assert PERCENT_BUCKET_LABELS[-1] == "90-100"
