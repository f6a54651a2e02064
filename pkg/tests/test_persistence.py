"""Storage layer: CSV exports, audit trail, encrypted secrets, registry."""

import base64
import json
from datetime import datetime, timedelta, timezone

import pytest

from edubot.core import (
    AttendanceSession,
    AuditEvent,
    CheckIn,
    InvalidInput,
    Outcome,
    Question,
    ResponseType,
    SurveyDefinition,
    SurveyKind,
    SurveyResponse,
    SurveyState,
)
from edubot.persistence import (
    ATTENDANCE_CSV_HEADER,
    AuditLog,
    REDACTED,
    RegistryStore,
    SecretsAuthError,
    SecretsIntegrityError,
    SecretsStore,
    SURVEY_CSV_HEADER,
    export_attendance_csv,
    export_survey_csv,
    hash_api_secret,
    new_api_key,
    read_csv_rows,
    redact_params,
    verify_api_secret,
)

T0 = datetime(2025, 1, 6, 9, 0, tzinfo=timezone.utc)


def ts(seconds):
    return T0 + timedelta(seconds=seconds)


def audit(at, action="checkin", params=None, actor="s1"):
    return AuditEvent(ts=at, actor=actor, action=action,
                      params=params or {}, outcome=Outcome.SUCCESS)


# ---------------------------------------------------------------------------
# CSV exports
# ---------------------------------------------------------------------------

def test_attendance_csv_round_trip(tmp_path):
    session = AttendanceSession(id="b1-att-1", group_id="g1", code="1423",
                                opened_at=T0)
    session.add_checkin(CheckIn("s2", "S2", ts(5)))
    session.add_checkin(CheckIn("s1", "S1", ts(9)))
    path = export_attendance_csv(session, tmp_path)
    assert path.name == "b1-att-1.csv"

    raw = path.read_text(encoding="utf-8").splitlines()
    assert raw[0] == ",".join(ATTENDANCE_CSV_HEADER)
    rows = read_csv_rows(path)
    assert [r["student_id"] for r in rows] == ["s2", "s1"]  # arrival order
    assert rows[0] == {
        "session_id": "b1-att-1", "group_id": "g1", "code": "1423",
        "student_id": "s2", "display_name": "S2",
        "checkin_ts": "2025-01-06T09:00:05+00:00",
    }


def test_attendance_csv_empty_session_is_header_only(tmp_path):
    session = AttendanceSession(id="b1-att-2", group_id="g1", code="0000",
                                opened_at=T0)
    path = export_attendance_csv(session, tmp_path)
    assert read_csv_rows(path) == []


def test_survey_csv_round_trip_all_types(tmp_path):
    survey = SurveyDefinition(
        id="b1-srv-1", kind=SurveyKind.COMPLEX, title="unit review",
        channel_id="general",
        questions=[
            Question(0, "difficulty?", ResponseType.FIVE_LEVEL),
            Question(1, "followed?", ResponseType.PERCENTAGE),
            Question(2, "comments?", ResponseType.FREE_TEXT),
        ],
        state=SurveyState.OPEN, opened_at=T0,
    )
    responses = [
        SurveyResponse("b1-srv-1", 0, "s1", ResponseType.FIVE_LEVEL, 4, ts(1)),
        SurveyResponse("b1-srv-1", 1, "s1", ResponseType.PERCENTAGE, 85, ts(2)),
        SurveyResponse("b1-srv-1", 2, "s1", ResponseType.FREE_TEXT,
                       "more, \"quoted\" examples", ts(3)),
    ]
    path = export_survey_csv(survey, responses, tmp_path)
    rows = read_csv_rows(path)
    assert list(rows[0]) == SURVEY_CSV_HEADER
    assert [r["response_type"] for r in rows] == [
        "five_level", "percentage", "free_text"]
    assert rows[0]["value"] == "4"
    assert rows[1]["value"] == "85"
    assert rows[2]["value"] == "more, \"quoted\" examples"  # survives quoting
    assert rows[0]["prompt"] == "difficulty?"
    assert rows[2]["ts"] == "2025-01-06T09:00:03+00:00"


def test_export_overwrites_atomically(tmp_path):
    session = AttendanceSession(id="b1-att-1", group_id="g1", code="1423",
                                opened_at=T0)
    export_attendance_csv(session, tmp_path)
    session.add_checkin(CheckIn("s1", "S1", ts(1)))
    path = export_attendance_csv(session, tmp_path)
    assert len(read_csv_rows(path)) == 1
    assert not list(tmp_path.glob("*.tmp"))


# ---------------------------------------------------------------------------
# audit log
# ---------------------------------------------------------------------------

def test_redact_params_by_key_substring():
    out = redact_params({
        "token": "tok-1", "ApiKey": "k1.s", "bot_TOKEN": "x",
        "passphrase": "p", "password": "p", "client_secret": "s",
        "group_id": "g1", "limit": 5,
    })
    assert out == {
        "token": REDACTED, "ApiKey": REDACTED, "bot_TOKEN": REDACTED,
        "passphrase": REDACTED, "password": REDACTED,
        "client_secret": REDACTED,
        "group_id": "g1", "limit": "5",  # non-secrets stringified, kept
    }


def test_audit_appends_jsonl_with_redaction(tmp_path):
    log = AuditLog(tmp_path)
    log.append(audit(T0, action="bot_created",
                     params={"token": "tok-1", "name": "demo"}))
    files = log.files()
    assert [f.name for f in files] == ["audit-2025-01-06.jsonl"]
    record = json.loads(files[0].read_text(encoding="utf-8"))
    assert record["params"] == {"token": REDACTED, "name": "demo"}
    assert record["actor"] == "s1"
    assert record["outcome"] == "success"
    assert record["ts"] == "2025-01-06T09:00:00+00:00"


def test_audit_splits_files_at_utc_date_boundary(tmp_path):
    log = AuditLog(tmp_path)
    log.append(audit(datetime(2025, 1, 6, 23, 59, 59, tzinfo=timezone.utc)))
    log.append(audit(datetime(2025, 1, 7, 0, 0, 1, tzinfo=timezone.utc)))
    assert [f.name for f in log.files()] == [
        "audit-2025-01-06.jsonl", "audit-2025-01-07.jsonl"]
    assert len(list(log.iter_events())) == 2


def test_audit_clamps_backward_timestamps_within_file(tmp_path):
    log = AuditLog(tmp_path)
    log.append(audit(ts(10)))
    log.append(audit(ts(4)))   # late arrival
    log.append(audit(ts(20)))
    stamps = [e["ts"] for e in log.iter_events()]
    assert stamps == sorted(stamps)
    assert stamps[1] == "2025-01-06T09:00:10+00:00"  # clamped up, not dropped


def test_audit_never_raises_and_counts_drops(tmp_path):
    blocker = tmp_path / "not-a-dir"
    blocker.write_text("file in the way")
    log = AuditLog(blocker / "logs")  # mkdir must fail underneath a file
    log.append(audit(T0))
    assert log.dropped == 1
    assert log.files() == []


def test_audit_iter_events_reads_in_order(tmp_path):
    log = AuditLog(tmp_path)
    for i in range(5):
        log.append(audit(ts(i), action=f"a{i}"))
    assert [e["action"] for e in log.iter_events()] == [
        "a0", "a1", "a2", "a3", "a4"]


# ---------------------------------------------------------------------------
# secrets
# ---------------------------------------------------------------------------

def store(tmp_path, passphrase="hunter2"):
    return SecretsStore(tmp_path / ".secrets.json", passphrase)


def test_secrets_round_trip(tmp_path):
    s = store(tmp_path)
    s.save({"bot:b1:token": "tok-1", "apikey:k1": "salt$hash"})
    assert s.load() == {"bot:b1:token": "tok-1", "apikey:k1": "salt$hash"}
    # and nothing readable sits on disk
    raw = (tmp_path / ".secrets.json").read_text(encoding="utf-8")
    assert "tok-1" not in raw


def test_secrets_missing_file_loads_empty(tmp_path):
    assert store(tmp_path).load() == {}


def test_secrets_update_and_delete(tmp_path):
    s = store(tmp_path)
    s.save({"a": "1"})
    assert s.update(b="2") == {"a": "1", "b": "2"}
    assert s.update(a=None) == {"b": "2"}
    assert s.load() == {"b": "2"}


def test_secrets_empty_passphrase_rejected(tmp_path):
    with pytest.raises(InvalidInput):
        SecretsStore(tmp_path / "s.json", "")


def test_wrong_passphrase_is_an_auth_error(tmp_path):
    store(tmp_path).save({"a": "1"})
    with pytest.raises(SecretsAuthError):
        store(tmp_path, passphrase="guessed-wrong").load()


def _flip_payload_byte(path, field):
    payload = json.loads(path.read_text(encoding="utf-8"))
    raw = bytearray(base64.b64decode(payload[field]))
    raw[0] ^= 0x01
    payload[field] = base64.b64encode(bytes(raw)).decode("ascii")
    path.write_text(json.dumps(payload), encoding="utf-8")


def test_bit_flipped_ciphertext_is_an_integrity_error(tmp_path):
    s = store(tmp_path)
    s.save({"a": "1"})
    _flip_payload_byte(s.path, "ciphertext")
    with pytest.raises(SecretsIntegrityError):
        s.load()


def test_bit_flipped_nonce_is_an_integrity_error(tmp_path):
    s = store(tmp_path)
    s.save({"a": "1"})
    _flip_payload_byte(s.path, "nonce")
    with pytest.raises(SecretsIntegrityError):
        s.load()


def test_tampered_salt_reads_as_wrong_passphrase(tmp_path):
    # the salt feeds the KDF, so damage there is indistinguishable from a
    # bad passphrase; what matters is that it cannot decrypt silently
    s = store(tmp_path)
    s.save({"a": "1"})
    _flip_payload_byte(s.path, "salt")
    with pytest.raises(SecretsAuthError):
        s.load()


def test_unparseable_secrets_file_is_an_integrity_error(tmp_path):
    s = store(tmp_path)
    s.save({"a": "1"})
    s.path.write_text("{not json", encoding="utf-8")
    with pytest.raises(SecretsIntegrityError):
        s.load()


def test_auth_and_integrity_errors_are_distinct():
    assert not issubclass(SecretsAuthError, SecretsIntegrityError)
    assert not issubclass(SecretsIntegrityError, SecretsAuthError)


def test_each_save_uses_fresh_salt_and_nonce(tmp_path):
    s = store(tmp_path)
    s.save({"a": "1"})
    first = json.loads(s.path.read_text(encoding="utf-8"))
    s.save({"a": "1"})
    second = json.loads(s.path.read_text(encoding="utf-8"))
    assert first["salt"] != second["salt"]
    assert first["nonce"] != second["nonce"]
    assert first["ciphertext"] != second["ciphertext"]
    assert s.load() == {"a": "1"}


# ---------------------------------------------------------------------------
# api keys
# ---------------------------------------------------------------------------

def test_new_api_key_format_and_verification():
    record, bearer = new_api_key("ci")
    key_id, _, secret = bearer.partition(".")
    assert key_id == record.key_id
    assert record.label == "ci"
    assert secret and secret not in record.secret_hash
    assert verify_api_secret(record.secret_hash, secret)
    assert not verify_api_secret(record.secret_hash, secret + "x")


def test_same_secret_hashes_differently_per_salt():
    a = hash_api_secret("swordfish")
    b = hash_api_secret("swordfish")
    assert a != b
    assert verify_api_secret(a, "swordfish")
    assert verify_api_secret(b, "swordfish")


def test_verify_rejects_malformed_stored_hash():
    assert not verify_api_secret("no-dollar-sign", "x")
    assert not verify_api_secret("nothex$deadbeef", "x")


# ---------------------------------------------------------------------------
# registry
# ---------------------------------------------------------------------------

def test_registry_round_trip_and_missing(tmp_path):
    reg = RegistryStore(tmp_path / "registry.json")
    assert reg.load() is None
    state = {"bots": [{"id": "b1"}], "version": 1}
    reg.save(state)
    assert reg.load() == state


def test_registry_bytes_are_canonical(tmp_path):
    a = RegistryStore(tmp_path / "a.json")
    b = RegistryStore(tmp_path / "b.json")
    a.save({"z": 1, "a": [3, 2], "nested": {"y": True, "x": None}})
    b.save({"nested": {"x": None, "y": True}, "a": [3, 2], "z": 1})
    assert a.path.read_bytes() == b.path.read_bytes()
    assert a.path.read_bytes().endswith(b"\n")
